"""Polar quadrature for integrands with a ``rho/|z|^2``-type singularity at the origin.

Every integral in the package goes through the rules defined here.  The
integration variable is written in polar form ``z = r * omega``:

* the sphere is discretised by :func:`sphere_rule` (two points in 1D, a
  periodic trapezoidal rule in 2D, Gauss x trapezoid in 3D); all rules are
  antipodally symmetric, so odd integrands cancel to rounding;
* radial segments ``[0, b]`` use :func:`singular_rule`, a composite
  Gauss-Legendre rule on geometrically graded panels whose innermost panel is
  flattened by ``r = h * tau**(1 / (2 - alpha))``;
* radial segments ``[a, b]`` with ``a > 0`` use :func:`log_rule`, i.e. Gauss
  panels in ``tau`` after ``r = a * (b / a)**tau``.

Error estimates compare the working rule with a rule carrying half the
radial and angular nodes.  Region integrals in 2D additionally bisect the
polar angle adaptively (:func:`integrate_rays`).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Union

import numpy as np

from .errors import ParameterError, QuadratureError

__all__ = [
    "QuadratureConfig",
    "QuadratureResult",
    "gauss_legendre",
    "singular_rule",
    "log_rule",
    "sphere_rule",
    "sphere_measure",
    "polar_nodes",
    "segment_nodes",
    "integrate_singular",
    "integrate_over_region",
    "integrate_rays",
    "RayIntegral",
    "converged",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Accuracy knobs of the polar quadrature engine.

    ``near_split_factor`` is the split radius in units of epsilon when a
    kernel scale is in play and an absolute radius otherwise.
    ``far_truncation`` is either ``"support"`` (use the density support) or
    a radius in units of the unscaled density.
    """

    near_split_factor: float = 4.0
    radial_nodes: int = 16
    angular_nodes: int = 64
    far_truncation: Union[float, str] = "support"
    rel_tol: float = 1e-10
    singularity_exponent: float = 1.0
    abs_tol: float = 1e-13
    geometric_levels: int = 6
    edge_panels: int = 4
    segment_panels: int = 6
    max_refinements: int = 3

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ParameterError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.abs_tol < 0.0:
            raise ParameterError("abs_tol must be nonnegative")
        if self.radial_nodes < 1 or self.angular_nodes < 2:
            raise ParameterError("need radial_nodes >= 1 and angular_nodes >= 2")
        if self.near_split_factor <= 0.0:
            raise ParameterError("near_split_factor must be positive")
        if not 0.0 <= self.singularity_exponent < 2.0:
            raise ParameterError("singularity_exponent must lie in [0, 2)")
        if isinstance(self.far_truncation, str):
            if self.far_truncation != "support":
                raise ParameterError("far_truncation must be 'support' or a positive radius")
        elif not self.far_truncation > 0.0:
            raise ParameterError("far_truncation must be positive")
        if self.geometric_levels < 0 or self.edge_panels < 1 or self.segment_panels < 1:
            raise ParameterError("panel counts out of range")
        if self.max_refinements < 0:
            raise ParameterError("max_refinements must be nonnegative")

    def refined(self, level: int) -> "QuadratureConfig":
        if level == 0:
            return self
        k = 2**level
        return dataclasses.replace(
            self,
            radial_nodes=self.radial_nodes * k,
            angular_nodes=self.angular_nodes * k,
            geometric_levels=self.geometric_levels + 2 * level,
        )

    def coarse(self) -> "QuadratureConfig":
        ang = max(2, self.angular_nodes // 2)
        ang += ang % 2
        return dataclasses.replace(
            self, radial_nodes=max(1, self.radial_nodes // 2), angular_nodes=ang
        )

    def with_alpha(self, alpha: float) -> "QuadratureConfig":
        return dataclasses.replace(self, singularity_exponent=float(alpha))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class QuadratureResult(NamedTuple):
    value: float
    error_estimate: float


def converged(value, error, config: QuadratureConfig) -> bool:
    scale = float(np.max(np.abs(value))) if np.size(value) else 0.0
    return float(np.max(error)) <= max(config.rel_tol * scale, config.abs_tol)


# ---------------------------------------------------------------------------
# reference rules


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    t, wt = 0.5 * (x + 1.0), 0.5 * w
    t.flags.writeable = False
    wt.flags.writeable = False
    return t, wt


def _composite(breakpoints, n):
    t, w = gauss_legendre(n)
    a = np.asarray(breakpoints[:-1])[:, None]
    b = np.asarray(breakpoints[1:])[:, None]
    return (a + (b - a) * t).ravel(), ((b - a) * w).ravel()


def _edge_graded(a, b, panels):
    # panels halving toward b: a, a + (b-a)/2, a + 3(b-a)/4, ..., b
    frac = 1.0 - 2.0 ** -np.arange(panels)
    return list(a + (b - a) * frac) + [b]


@lru_cache(maxsize=None)
def singular_rule(alpha: float, nodes: int, levels: int, edge_panels: int,
                  split: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_0^1 f(r) dr`` with ``f ~ r**(1 - alpha)`` at 0.

    Panels are geometric toward 0 down to ``split * 2**-levels``; on the
    innermost panel ``r = h * tau**m`` with ``m = 1 / (2 - alpha)`` turns
    ``r**(1-alpha) dr`` into a constant multiple of ``dtau``.  Beyond
    ``split`` (and on the last near panel when ``split == 1``) panels are
    graded toward 1 to follow densities that vanish smoothly at their
    support edge.
    """
    m = 1.0 / (2.0 - alpha)
    split = min(1.0, float(split))
    h = split * 2.0**-levels
    tau, wt = gauss_legendre(nodes)
    r0 = h * tau**m
    w0 = h * m * tau ** (m - 1.0) * wt

    geo = [split * 2.0**-k for k in range(levels, -1, -1)]  # h, ..., split
    if split >= 1.0 and levels >= 1:
        bps = geo[:-1] + _edge_graded(0.5, 1.0, edge_panels)[1:]
    elif split >= 1.0:
        bps = _edge_graded(h, 1.0, edge_panels)
    else:
        bps = geo + _edge_graded(split, 1.0, edge_panels)[1:]
    r1, w1 = _composite(bps, nodes)
    r = np.concatenate([r0, r1])
    w = np.concatenate([w0, w1])
    r.flags.writeable = False
    w.flags.writeable = False
    return r, w


@lru_cache(maxsize=None)
def log_rule(nodes: int, panels: int, edge_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule in ``tau`` on [0, 1] for the substitution ``r = a * (b/a)**tau``."""
    bps = list(np.linspace(0.0, 1.0, panels + 1)[:-1])
    bps += _edge_graded(bps[-1], 1.0, edge_panels)[1:]
    tau, w = _composite(bps, nodes)
    tau.flags.writeable = False
    w.flags.writeable = False
    return tau, w


def sphere_measure(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (2 for dim == 1)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@lru_cache(maxsize=None)
def sphere_rule(dim: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Antipodally symmetric directions and weights on the unit sphere."""
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
        w = np.array([1.0, 1.0])
    elif dim == 2:
        if k % 2:
            k += 1
        theta = 2.0 * np.pi * (np.arange(k) + 0.5) / k
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        w = np.full(k, 2.0 * np.pi / k)
    elif dim == 3:
        if k % 2:
            k += 1
        mu, wmu = np.polynomial.legendre.leggauss(max(2, k // 2))
        phi = 2.0 * np.pi * (np.arange(k) + 0.5) / k
        s = np.sqrt(1.0 - mu**2)
        dirs = np.stack(
            [
                (s[:, None] * np.cos(phi)[None, :]).ravel(),
                (s[:, None] * np.sin(phi)[None, :]).ravel(),
                np.repeat(mu, k),
            ],
            axis=-1,
        )
        w = (wmu[:, None] * np.full(k, 2.0 * np.pi / k)[None, :]).ravel()
    else:
        raise ParameterError(f"dimension {dim} not supported (1, 2 or 3)")
    dirs.flags.writeable = False
    w.flags.writeable = False
    return dirs, w


# ---------------------------------------------------------------------------
# node builders


def polar_nodes(dim: int, config: QuadratureConfig, extents, split_radius=None):
    """Nodes for ``int f(z) dz`` over the star-shaped set ``r < extents(omega)``.

    Parameters
    ----------
    extents : float or callable
        Radial extent, either a constant or a map from directions ``(K, n)``
        to radii ``(K,)``.
    split_radius : float, optional
        Absolute near/far split radius; measured along the longest ray.

    Returns
    -------
    dirs : (K, n) array
    r : (K, N) array
    w : (K, N) array
        Weights including the angular weight and the Jacobian ``r**(n-1)``.
    """
    dirs, aw = sphere_rule(dim, config.angular_nodes)
    if callable(extents):
        radii = np.asarray(extents(dirs), dtype=float)
    else:
        radii = np.full(len(dirs), float(extents))
    split = 1.0
    if split_radius is not None:
        split = min(1.0, float(split_radius) / float(np.max(radii)))
    t, wt = singular_rule(
        float(config.singularity_exponent),
        config.radial_nodes,
        config.geometric_levels,
        config.edge_panels,
        split,
    )
    r = radii[:, None] * t[None, :]
    w = aw[:, None] * radii[:, None] * wt[None, :] * r ** (dim - 1)
    return dirs, r, w


def segment_nodes(starts, ends, config: QuadratureConfig, dim: int):
    """Radial nodes on segments ``[starts, ends]`` (arrays of equal shape).

    Segments starting at 0 use :func:`singular_rule`, the others
    :func:`log_rule`.  Empty segments get zero weights and a harmless positive
    abscissa.  Returns ``r`` and ``w`` with a trailing node axis; ``w``
    includes the Jacobian ``r**(dim-1)`` but no angular weight.
    """
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    ts, ws = singular_rule(
        float(config.singularity_exponent),
        config.radial_nodes,
        config.geometric_levels,
        config.edge_panels,
        1.0,
    )
    tl, wl = log_rule(config.radial_nodes, config.segment_panels, config.edge_panels)
    n = max(len(ts), len(tl))
    ts, ws = _pad(ts, ws, n)
    tl, wl = _pad(tl, wl, n)

    empty = ~(ends > starts)
    at_zero = (starts <= 0.0) & ~empty
    a = np.where(at_zero | empty, 1.0, starts)[..., None]
    b = np.where(empty, 2.0, ends)[..., None]
    ratio = np.log(b / a)
    r_log = a * np.exp(ratio * tl)
    w_log = r_log * ratio * wl
    r_sing = b * ts
    w_sing = b * ws
    r = np.where(at_zero[..., None], r_sing, r_log)
    w = np.where(at_zero[..., None], w_sing, w_log)
    fallback = np.where(np.isfinite(ends) & (ends > 0.0), ends, 1.0)[..., None]
    r = np.where(empty[..., None], fallback, r)
    w = np.where(empty[..., None], 0.0, w) * r ** (dim - 1)
    return r, w


def _pad(t, w, n):
    if len(t) == n:
        return t, w
    extra = n - len(t)
    return np.concatenate([t, np.full(extra, t[-1])]), np.concatenate([w, np.zeros(extra)])


# ---------------------------------------------------------------------------
# integrators


def _resolve_extent(config, radius, extent):
    if extent is not None:
        return extent
    if radius is not None:
        return float(radius)
    if isinstance(config.far_truncation, str):
        raise ParameterError("no integration radius given and far_truncation is 'support'")
    return float(config.far_truncation)


def _polar_sum(f, dim, config, extent, split_radius, center):
    dirs, r, w = polar_nodes(dim, config, extent, split_radius)
    z = r[..., None] * dirs[:, None, :]
    if center is not None:
        z = z + np.asarray(center, dtype=float)
    vals = np.asarray(f(z), dtype=float)
    wb = w.reshape(w.shape + (1,) * (vals.ndim - 2))
    return np.sum(vals * wb, axis=(0, 1))


def integrate_singular(
    f: Callable[[np.ndarray], np.ndarray],
    dim: int,
    config: QuadratureConfig = QuadratureConfig(),
    *,
    radius=None,
    extent=None,
    split_radius=None,
    center=None,
) -> QuadratureResult:
    """Integrate ``f`` over a ball (or star-shaped support) around the origin.

    ``f`` receives points of shape ``(K, N, dim)`` and returns values of shape
    ``(K, N)`` or ``(K, N, ...)``; vector-valued integrands are reduced over
    the node axes only.  Singular behaviour ``r**(n-1) |f| ~ r**(1-alpha)``
    at ``center`` (default origin) with ``alpha = config.singularity_exponent``
    is integrated without loss of order.
    """
    extent = _resolve_extent(config, radius, extent)
    if split_radius is None:
        split_radius = config.near_split_factor
    value = err = None
    for level in range(config.max_refinements + 1):
        cfg = config.refined(level)
        value = _polar_sum(f, dim, cfg, extent, split_radius, center)
        coarse = _polar_sum(f, dim, cfg.coarse(), extent, split_radius, center)
        err = np.abs(value - coarse)
        if converged(value, err, config):
            break
    else:
        raise QuadratureError(
            f"integrate_singular: error estimate {np.max(err):.3e} above tolerance",
            value=value,
            error_estimate=float(np.max(err)),
        )
    value = float(value) if np.ndim(value) == 0 else value
    return QuadratureResult(value, float(np.max(err)))


# ---------------------------------------------------------------------------
# ray integrals over regions


class RayIntegral(NamedTuple):
    value: float
    error_estimate: float
    mass: float


def _ray_sums(g, domain, center, dirs, r_max, cfg, inside):
    """Per-direction radial integrals of ``g`` over the selected ray segments."""
    starts, ends = domain.ray_segments(center, dirs, r_max(dirs), inside=inside)
    if starts.shape[1] == 0:
        z = np.zeros(len(dirs))
        return z, z
    r, w = segment_nodes(starts, ends, cfg, domain.dim)
    y = center + r[..., None] * dirs[:, None, None, :]
    vals = np.asarray(g(dirs, r, y), dtype=float) * w
    return np.sum(vals, axis=(1, 2)), np.sum(np.abs(vals), axis=(1, 2))


def _uniform_sphere(g, domain, center, r_max, cfg, inside):
    dirs, aw = sphere_rule(domain.dim, cfg.angular_nodes)
    v, m = _ray_sums(g, domain, center, dirs, r_max, cfg, inside)
    return float(np.sum(aw * v)), float(np.sum(aw * m))


def _adaptive_circle(g, domain, center, r_max, cfg, inside, tol_of, max_rounds=40):
    """Adaptive Gauss rule in the polar angle: bisect panels until they agree with their halves."""
    t, wt = gauss_legendre(8)

    def panel(a, b):
        theta = a[:, None] + (b - a)[:, None] * t[None, :]
        dirs = np.stack([np.cos(theta).ravel(), np.sin(theta).ravel()], axis=-1)
        v, m = _ray_sums(g, domain, center, dirs, r_max, cfg, inside)
        scale = (b - a)[:, None] * wt[None, :]
        return np.sum(scale * v.reshape(theta.shape), axis=1), np.sum(scale * m.reshape(theta.shape), axis=1)

    edges = np.linspace(0.0, 2.0 * np.pi, max(4, cfg.angular_nodes // 8) + 1)
    a, b = edges[:-1], edges[1:]
    whole, whole_m = panel(a, b)
    done_v = done_m = done_e = 0.0
    for _ in range(max_rounds):
        mid = 0.5 * (a + b)
        lv, lm = panel(a, mid)
        rv, rm = panel(mid, b)
        kids, kids_m = lv + rv, lm + rm
        err = np.abs(whole - kids)
        tol = tol_of(done_m + float(np.sum(kids_m)))
        ok = err <= tol * (b - a) / (2.0 * np.pi)
        done_v += float(np.sum(kids[ok]))
        done_m += float(np.sum(kids_m[ok]))
        done_e += float(np.sum(err[ok]))
        if np.all(ok):
            return done_v, done_m, done_e
        bad = ~ok
        pending = float(np.sum(err[bad]))
        a, b, mid = a[bad], b[bad], mid[bad]
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        whole = np.concatenate([lv[bad], rv[bad]])
        whole_m = np.concatenate([lm[bad], rm[bad]])
    return done_v + float(np.sum(whole)), done_m + float(np.sum(whole_m)), done_e + pending


def integrate_rays(
    g: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    domain,
    center,
    r_max,
    config: QuadratureConfig = QuadratureConfig(),
    *,
    inside: bool = True,
    floor: float = 0.0,
    label: str = "integrate_rays",
) -> RayIntegral:
    """Integrate over ``domain`` (or its complement) within ``|y - center| < r_max(omega)``.

    ``g(dirs, r, y)`` returns integrand values of shape ``(K, S, N)`` for
    directions ``(K, n)``, radii ``(K, S, N)`` and points ``(K, S, N, n)``.
    In 2D the angle is integrated adaptively, which resolves the fast angular
    variation of near-boundary regions; elsewhere the sphere rule is refined
    uniformly.  Convergence is judged against ``rel_tol`` times the larger of
    the absolute integral and ``floor``.
    """
    center = np.asarray(center, dtype=float).reshape(domain.dim)
    if not callable(r_max):
        const = float(r_max)
        r_max = lambda dirs: np.full(len(dirs), const)  # noqa: E731

    def tol_of(mass):
        return max(config.rel_tol * max(mass, floor), config.abs_tol)

    value = err = mass = 0.0
    for level in range(config.max_refinements + 1):
        cfg = config.refined(level)
        if domain.dim == 2:
            value, mass, aerr = _adaptive_circle(g, domain, center, r_max, cfg, inside, tol_of)
            coarse, _, _ = _adaptive_circle(g, domain, center, r_max, cfg.coarse(), inside, tol_of)
            err = aerr + abs(value - coarse)
        else:
            value, mass = _uniform_sphere(g, domain, center, r_max, cfg, inside)
            coarse, _ = _uniform_sphere(g, domain, center, r_max, cfg.coarse(), inside)
            err = abs(value - coarse)
        if err <= tol_of(mass):
            return RayIntegral(float(value), float(err), float(mass))
    raise QuadratureError(f"{label}: error estimate {err:.3e} above tolerance", value=value, error_estimate=err)


def integrate_over_region(
    f: Callable[[np.ndarray], np.ndarray],
    domain,
    center,
    radius: float,
    config: QuadratureConfig = QuadratureConfig(),
    *,
    complement: bool = False,
) -> QuadratureResult:
    """Integrate ``f`` over ``domain`` (or its complement) intersected with a ball.

    Uses polar coordinates around ``center``; the region is cut out of each
    ray exactly by ``domain.ray_segments``.  ``f`` receives points of shape
    ``(K, S, N, dim)``.
    """
    res = integrate_rays(lambda dirs, r, y: f(y), domain, center, radius, config,
                         inside=not complement, label="integrate_over_region")
    return QuadratureResult(res.value, res.error_estimate)
