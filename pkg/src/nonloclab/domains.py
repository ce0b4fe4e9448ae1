"""Domains: full space, interval, (transformed) ball and graph half-spaces.

Besides membership and boundary geometry every domain can cut a ray
``x + r * omega`` into inside/outside segments (:meth:`Domain.ray_segments`),
which is how region integrals are restricted exactly instead of by masking.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
import sympy as sp

from .errors import ContractError, ParameterError
from .quadrature import gauss_legendre, sphere_rule

__all__ = [
    "Domain",
    "FullSpace",
    "Interval",
    "Ball",
    "GraphHalfSpace",
    "rotation_2d",
]


def rotation_2d(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


class Domain:
    """Base class; subclasses implement ``level`` and ``_crossings``."""

    kind = "abstract"
    has_boundary = True
    is_bounded = False

    def __init__(self, dim: int):
        if dim not in (1, 2, 3):
            raise ParameterError(f"dim must be 1, 2 or 3, got {dim}")
        self.dim = dim

    # --- membership -------------------------------------------------------

    def level(self, x) -> np.ndarray:
        """Signed function, positive inside; zero set is the boundary."""
        raise NotImplementedError

    def contains(self, x) -> np.ndarray:
        return self.level(x) > 0.0

    def boundary_distance(self, x) -> np.ndarray:
        """Signed distance to the boundary, positive inside."""
        raise NotImplementedError

    def require_interior(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        if not (self.contains(x) and self.boundary_distance(x) > 0.0):
            raise ContractError(f"point not interior: {x.tolist()}")
        return x

    # --- boundary ---------------------------------------------------------

    def outward_normal(self, x) -> np.ndarray:
        raise NotImplementedError

    def boundary_samples(self, count: int) -> np.ndarray:
        raise NotImplementedError

    # --- rays -------------------------------------------------------------

    def _crossings(self, x, dirs, r_max) -> np.ndarray:
        """Sorted positive radii where the ray leaves/enters; inf-padded (K, C)."""
        raise NotImplementedError

    def ray_segments(self, x, dirs, r_max, inside: bool = True):
        """Segments of ``[0, r_max]`` along ``x + r * dirs`` inside (or outside) the domain.

        Returns ``starts, ends`` of shape ``(K, S)``; unused slots have
        ``start == end``.
        """
        x = np.asarray(x, dtype=float).reshape(self.dim)
        dirs = np.asarray(dirs, dtype=float)
        k = len(dirs)
        r_max = np.broadcast_to(np.asarray(r_max, dtype=float), (k,))
        cross = np.sort(self._crossings(x, dirs, r_max), axis=1)
        bps = np.concatenate(
            [np.zeros((k, 1)), np.minimum(cross, r_max[:, None]), r_max[:, None]], axis=1
        )
        starts, ends = bps[:, :-1], bps[:, 1:]
        x_in = bool(self.contains(x))
        idx = np.arange(starts.shape[1])
        seg_inside = (idx % 2 == 0) == x_in
        keep = seg_inside if inside else ~seg_inside
        return starts[:, keep], ends[:, keep]

    # --- misc -------------------------------------------------------------

    def bounding_box(self):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def volume_rule(self, level: int = 0):
        raise ContractError(f"{self.kind} is not bounded; no volume rule")

    def to_dict(self) -> dict:
        raise NotImplementedError


class FullSpace(Domain):
    kind = "full_space"
    has_boundary = False

    def level(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1])

    def boundary_distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], np.inf)

    def outward_normal(self, x):
        raise ContractError("full space has no boundary")

    def boundary_samples(self, count):
        raise ContractError("full space has no boundary")

    def _crossings(self, x, dirs, r_max):
        return np.zeros((len(dirs), 0))

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


class Interval(Domain):
    kind = "interval"
    is_bounded = True

    def __init__(self, a: float = 0.0, b: float = 1.0):
        super().__init__(1)
        if not b > a:
            raise ParameterError("interval needs a < b")
        self.a, self.b = float(a), float(b)

    def level(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return np.minimum(x - self.a, self.b - x)

    boundary_distance = level

    def outward_normal(self, x):
        x = np.asarray(x, dtype=float)
        mid = 0.5 * (self.a + self.b)
        return np.where(x < mid, -1.0, 1.0)

    def boundary_samples(self, count=2):
        return np.array([[self.a], [self.b]])

    def _crossings(self, x, dirs, r_max):
        d = dirs[:, 0]
        roots = np.stack([(self.a - x[0]) / d, (self.b - x[0]) / d], axis=1)
        return np.where(roots > 0.0, roots, np.inf)

    def bounding_box(self):
        return np.array([self.a]), np.array([self.b])

    def volume_rule(self, level: int = 0):
        """Composite Gauss rule graded geometrically toward both endpoints."""
        L = self.b - self.a
        k = 12 + 2 * level
        left = [self.a + 0.5 * L * 2.0**-j for j in range(k, 0, -1)]
        right = [self.b - 0.5 * L * 2.0**-j for j in range(1, k + 1)]
        bps = np.array([self.a] + left + [0.5 * (self.a + self.b)] + right + [self.b])
        t, w = gauss_legendre(12 + 4 * level)
        a, b = bps[:-1, None], bps[1:, None]
        return (a + (b - a) * t).reshape(-1, 1), ((b - a) * w).ravel()

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


class Ball(Domain):
    """``c + T B_R(0)`` (or its exterior); ``T`` defaults to the identity."""

    kind = "ball"

    def __init__(self, dim: int = 2, center=None, radius: float = 1.0, transform=None,
                 exterior: bool = False):
        super().__init__(dim)
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)
        if not radius > 0.0:
            raise ParameterError("radius must be positive")
        self.radius = float(radius)
        self.transform = np.eye(dim) if transform is None else np.asarray(transform, dtype=float).reshape(dim, dim)
        if abs(np.linalg.det(self.transform)) < 1e-14:
            raise ParameterError("transform must be invertible")
        self.inv = np.linalg.inv(self.transform)
        self.exterior = bool(exterior)
        self.is_bounded = not self.exterior
        self._smin = float(np.min(np.linalg.svd(self.transform, compute_uv=False)))

    def _hat(self, x):
        return (np.asarray(x, dtype=float) - self.center) @ self.inv.T

    def level(self, x):
        d = self.radius - np.linalg.norm(self._hat(x), axis=-1)
        return -d if self.exterior else d

    def boundary_distance(self, x):
        # exact for T = I; a lower bound (scaled by the smallest singular value) otherwise
        return self._smin * self.level(x)

    def outward_normal(self, x):
        g = self._hat(x) @ self.inv
        nrm = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return -nrm if self.exterior else nrm

    def boundary_samples(self, count=256):
        if self.dim == 1:
            unit = np.array([[-1.0], [1.0]])
        elif self.dim == 2:
            th = 2.0 * np.pi * np.arange(count) / count
            unit = np.stack([np.cos(th), np.sin(th)], axis=-1)
        else:
            i = np.arange(count) + 0.5
            phi = np.arccos(1.0 - 2.0 * i / count)
            th = np.pi * (1.0 + 5.0**0.5) * i
            unit = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=-1)
        return self.center + (self.radius * unit) @ self.transform.T

    def _crossings(self, x, dirs, r_max):
        p = self._hat(x)
        v = dirs @ self.inv.T
        a = np.sum(v * v, axis=-1)
        b = np.sum(p * v, axis=-1)
        c = float(p @ p) - self.radius**2
        disc = b * b - a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        roots = np.stack([(-b - sq) / a, (-b + sq) / a], axis=1)
        ok = (disc > 0.0)[:, None] & (roots > 0.0)
        return np.where(ok, roots, np.inf)

    def bounding_box(self):
        if self.exterior:
            return super().bounding_box()
        half = self.radius * np.linalg.norm(self.transform, axis=1)
        return self.center - half, self.center + half

    def volume_rule(self, level: int = 0):
        if self.exterior:
            return super().volume_rule(level)
        n = self.dim
        k = 10 + 2 * level
        bps = np.array([0.0, 0.5] + [1.0 - 0.5 * 2.0**-j for j in range(1, k + 1)] + [1.0])
        t, w = gauss_legendre(12 + 4 * level)
        a, b = bps[:-1, None], bps[1:, None]
        r = (a + (b - a) * t).ravel()
        wr = ((b - a) * w).ravel() * r ** (n - 1)
        dirs, aw = sphere_rule(n, 64 * 2**level)
        pts = r[None, :, None] * dirs[:, None, :]
        wts = aw[:, None] * wr[None, :]
        scale = self.radius**n * abs(np.linalg.det(self.transform))
        x = self.center + (self.radius * pts.reshape(-1, n)) @ self.transform.T
        return x, (wts * scale).ravel()

    def to_dict(self):
        return {
            "kind": self.kind, "dim": self.dim, "center": self.center.tolist(),
            "radius": self.radius, "transform": self.transform.tolist(), "exterior": self.exterior,
        }


class GraphHalfSpace(Domain):
    """``Q {xi : xi_n > gamma(xi')}`` with ``gamma = amplitude * exp(-|xi'|^2)`` by default.

    ``gamma`` may also be given as a sympy expression in the symbols
    ``xi_0 .. xi_{n-2}``.  Boundary sampling and bounding boxes use the slab
    ``|xi'| <= slab_half_width``.
    """

    kind = "half_space_graph"

    def __init__(self, dim: int = 2, amplitude: float = 0.0, rotation=None, gamma=None,
                 slab_half_width: float = 5.0):
        super().__init__(dim)
        if dim < 2:
            raise ParameterError("graph half-space needs dim >= 2")
        self.rotation = np.eye(dim) if rotation is None else np.asarray(rotation, dtype=float).reshape(dim, dim)
        q = self.rotation
        if np.max(np.abs(q @ q.T - np.eye(dim))) > 1e-10 or abs(np.linalg.det(q) - 1.0) > 1e-10:
            raise ParameterError("rotation must lie in SO(n)")
        self.amplitude = float(amplitude)
        self.slab_half_width = float(slab_half_width)
        self.symbols = sp.symbols(f"xi0:{dim - 1}", real=True)
        if gamma is None:
            gamma = self.amplitude * sp.exp(-sum(s**2 for s in self.symbols))
        self.gamma_expr = sp.sympify(gamma)
        self.flat = self.gamma_expr == 0
        grad = [sp.diff(self.gamma_expr, s) for s in self.symbols]
        hess = [[sp.diff(g, s) for s in self.symbols] for g in grad]
        self._g = sp.lambdify(self.symbols, self.gamma_expr, "numpy")
        self._dg = sp.lambdify(self.symbols, grad, "numpy")
        self._d2g = sp.lambdify(self.symbols, hess, "numpy")

    # gamma and derivatives on arrays of shape (..., n-1)
    def gamma(self, xp):
        xp = np.asarray(xp, dtype=float)
        return np.broadcast_to(self._g(*np.moveaxis(xp, -1, 0)), xp.shape[:-1]).astype(float)

    def gamma_grad(self, xp):
        xp = np.asarray(xp, dtype=float)
        parts = self._dg(*np.moveaxis(xp, -1, 0))
        return np.stack([np.broadcast_to(p, xp.shape[:-1]) for p in parts], axis=-1).astype(float)

    def gamma_hess(self, xp):
        xp = np.asarray(xp, dtype=float)
        rows = self._d2g(*np.moveaxis(xp, -1, 0))
        return np.stack(
            [np.stack([np.broadcast_to(e, xp.shape[:-1]) for e in row], axis=-1) for row in rows], axis=-2
        ).astype(float)

    def local(self, x):
        return np.asarray(x, dtype=float) @ self.rotation

    def level(self, x):
        xi = self.local(x)
        return xi[..., -1] - self.gamma(xi[..., :-1])

    def boundary_distance(self, x):
        xi = np.asarray(self.local(x), dtype=float)
        shape = xi.shape[:-1]
        xi = xi.reshape(-1, self.dim)
        if self.flat:
            return xi[:, -1].reshape(shape)
        t = xi[:, :-1].copy()
        eye = np.eye(self.dim - 1)
        for _ in range(40):
            g = self.gamma(t)
            dg = self.gamma_grad(t)
            d2g = self.gamma_hess(t)
            res = g - xi[:, -1]
            grad = (t - xi[:, :-1]) + res[:, None] * dg
            hess = eye + dg[:, :, None] * dg[:, None, :] + res[:, None, None] * d2g
            step = np.linalg.solve(hess, grad[..., None])[..., 0]
            t = t - step
            if np.max(np.abs(step)) < 1e-15:
                break
        foot = np.concatenate([t, self.gamma(t)[:, None]], axis=1)
        dist = np.linalg.norm(xi - foot, axis=1)
        sign = np.sign(xi[:, -1] - self.gamma(xi[:, :-1]))
        return (sign * dist).reshape(shape)

    def outward_normal(self, x):
        xi = self.local(x)
        dg = self.gamma_grad(xi[..., :-1])
        nl = np.concatenate([dg, -np.ones(dg.shape[:-1] + (1,))], axis=-1)
        nl /= np.linalg.norm(nl, axis=-1, keepdims=True)
        return nl @ self.rotation.T

    def boundary_samples(self, count=1000):
        w = self.slab_half_width
        if self.dim == 2:
            xp = np.linspace(-w, w, count)[:, None]
        else:
            m = max(2, int(round(count ** (1.0 / (self.dim - 1)))))
            axes = np.meshgrid(*([np.linspace(-w, w, m)] * (self.dim - 1)), indexing="ij")
            xp = np.stack([a.ravel() for a in axes], axis=-1)
        xi = np.concatenate([xp, self.gamma(xp)[:, None]], axis=1)
        return xi @ self.rotation.T

    def c1_norm(self, count: int = 2001) -> float:
        """Sampled ``sup |gamma| + sup |grad gamma|`` on the slab."""
        w = self.slab_half_width
        if self.dim == 2:
            xp = np.linspace(-w, w, count)[:, None]
        else:
            m = int(round(count**0.5))
            axes = np.meshgrid(*([np.linspace(-w, w, m)] * (self.dim - 1)), indexing="ij")
            xp = np.stack([a.ravel() for a in axes], axis=-1)
        return float(np.max(np.abs(self.gamma(xp))) + np.max(np.linalg.norm(self.gamma_grad(xp), axis=-1)))

    def _crossings(self, x, dirs, r_max, samples: int = 48, bisections: int = 60):
        xi0 = self.local(x)
        v = dirs @ self.rotation
        if self.flat:
            with np.errstate(divide="ignore", invalid="ignore"):
                root = -xi0[-1] / v[:, -1]
            root = np.where(np.isfinite(root) & (root > 0.0), root, np.inf)
            return root[:, None]
        # sample the level function along each ray and bisect every sign change
        t = np.linspace(0.0, 1.0, samples + 1)
        r = r_max[:, None] * t[None, :]
        pts = xi0 + r[..., None] * v[:, None, :]
        g = pts[..., -1] - self.gamma(pts[..., :-1])
        change = np.signbit(g[:, :-1]) != np.signbit(g[:, 1:])
        count = int(np.max(np.sum(change, axis=1))) if change.size else 0
        out = np.full((len(dirs), max(count, 1)), np.inf)
        if count == 0:
            return out
        ray, seg = np.nonzero(change)
        lo, hi = r[ray, seg], r[ray, seg + 1]
        glo = g[ray, seg]
        vv = v[ray]
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            p = xi0 + mid[:, None] * vv
            gm = p[:, -1] - self.gamma(p[:, :-1])
            same = np.signbit(gm) == np.signbit(glo)
            lo = np.where(same, mid, lo)
            glo = np.where(same, gm, glo)
            hi = np.where(same, hi, mid)
        slot = np.zeros(len(ray), dtype=int)
        for i in range(1, len(ray)):
            if ray[i] == ray[i - 1]:
                slot[i] = slot[i - 1] + 1
        out[ray, slot] = 0.5 * (lo + hi)
        return out

    def bounding_box(self):
        if np.max(np.abs(self.rotation - np.eye(self.dim))) > 0.0:
            return super().bounding_box()
        w = self.slab_half_width
        lo = np.array([-w] * (self.dim - 1) + [float(np.min(self.gamma(self.boundary_samples(201)[:, :-1])))])
        hi = np.array([w] * (self.dim - 1) + [np.inf])
        return lo, hi

    def to_dict(self):
        return {
            "kind": self.kind, "dim": self.dim, "amplitude": self.amplitude,
            "rotation": self.rotation.tolist(), "gamma": str(self.gamma_expr),
            "slab_half_width": self.slab_half_width,
        }
