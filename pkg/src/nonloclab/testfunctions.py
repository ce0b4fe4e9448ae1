"""Smooth test functions with analytic derivatives up to third order.

Functions are built as sympy expressions and lambdified once, so gradients,
Hessians and third derivatives are exact.  Recipes that respect the natural
boundary condition ``M grad u . n = 0`` of a domain are produced by
:func:`make_compatible_function`.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import sympy as sp

from .domains import Ball, Domain, FullSpace, GraphHalfSpace, Interval
from .errors import ContractError, ParameterError, UnsupportedError

__all__ = [
    "TestFunction",
    "CompatRecord",
    "make_test_function",
    "make_compatible_function",
    "neumann_compat_check",
    "global_extension",
    "sobolev_norm",
    "linear_combination",
    "derivative_consistency",
]

# below this distance from the branch points the smooth pieces underflow to 0
_EDGE = 1e-3


def sym_bump(t):
    """``exp(1 - 1/(1 - t))`` for ``t < 1``, else 0; equals 1 at ``t = 0``."""
    return sp.Piecewise((sp.exp(1 - 1 / (1 - t)), t < 1 - _EDGE), (0, True))


def sym_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    f0 = sp.exp(-1 / t)
    f1 = sp.exp(-1 / (1 - t))
    return sp.Piecewise((0, t <= _EDGE), (1, t >= 1 - _EDGE), (f0 / (f0 + f1), True))


@dataclass(frozen=True)
class CompatRecord:
    """Declared compatibility: ``M grad u . n = 0`` on the boundary of ``domain``."""

    domain: dict
    m: list
    claims_neumann: bool = True

    def to_dict(self):
        return {"domain": self.domain, "m": self.m, "claims_neumann": self.claims_neumann}


def _broadcast(parts, shape):
    return np.stack([np.broadcast_to(np.asarray(p, dtype=float), shape) for p in parts], axis=-1)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A globally defined smooth function on ``R^dim`` with analytic derivatives.

    Evaluators take arrays of shape ``(..., dim)``.
    """

    __test__ = False  # keep pytest from collecting this class

    dim: int
    expr: sp.Expr
    name: str = "custom"
    params: dict = field(default_factory=dict)
    support_center: Optional[np.ndarray] = None
    support_radius: float = np.inf
    compat: Optional[CompatRecord] = None
    is_global: bool = True
    extension_of: Optional[str] = None

    def __post_init__(self):
        syms = sp.symbols(f"x0:{self.dim}", real=True)
        expr = sp.sympify(self.expr)
        grad = [sp.diff(expr, s) for s in syms]
        idx2 = list(itertools.combinations_with_replacement(range(self.dim), 2))
        idx3 = list(itertools.combinations_with_replacement(range(self.dim), 3))
        hess = [sp.diff(grad[i], syms[j]) for i, j in idx2]
        hess_map = dict(zip(idx2, hess))
        third = [sp.diff(hess_map[(i, j)], syms[k]) for i, j, k in idx3]
        object.__setattr__(self, "_syms", syms)
        object.__setattr__(self, "_f", sp.lambdify(syms, expr, "numpy", cse=True))
        object.__setattr__(self, "_g", sp.lambdify(syms, grad, "numpy", cse=True))
        object.__setattr__(self, "_h", sp.lambdify(syms, hess, "numpy", cse=True))
        object.__setattr__(self, "_t", sp.lambdify(syms, third, "numpy", cse=True))
        object.__setattr__(self, "_idx2", idx2)
        object.__setattr__(self, "_idx3", idx3)
        if self.support_center is None:
            object.__setattr__(self, "support_center", np.zeros(self.dim))
        else:
            object.__setattr__(self, "support_center", np.asarray(self.support_center, dtype=float))

    def _args(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ParameterError(f"points must have trailing dimension {self.dim}")
        return x.shape[:-1], [x[..., i] for i in range(self.dim)]

    def value(self, x) -> np.ndarray:
        shape, args = self._args(x)
        with np.errstate(all="ignore"):
            return np.broadcast_to(np.asarray(self._f(*args), dtype=float), shape).copy()

    __call__ = value

    def gradient(self, x) -> np.ndarray:
        shape, args = self._args(x)
        with np.errstate(all="ignore"):
            return _broadcast(self._g(*args), shape)

    def hessian(self, x) -> np.ndarray:
        shape, args = self._args(x)
        with np.errstate(all="ignore"):
            flat = _broadcast(self._h(*args), shape)
        out = np.empty(shape + (self.dim, self.dim))
        for c, (i, j) in enumerate(self._idx2):
            out[..., i, j] = out[..., j, i] = flat[..., c]
        return out

    def third(self, x) -> np.ndarray:
        shape, args = self._args(x)
        with np.errstate(all="ignore"):
            flat = _broadcast(self._t(*args), shape)
        n = self.dim
        out = np.empty(shape + (n, n, n))
        for c, idx in enumerate(self._idx3):
            for perm in set(itertools.permutations(idx)):
                out[(...,) + perm] = flat[..., c]
        return out

    @property
    def compact(self) -> bool:
        return bool(np.isfinite(self.support_radius))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "params": self.params,
            "support_center": self.support_center.tolist(),
            "support_radius": self.support_radius if self.compact else "inf",
            "compat": None if self.compat is None else self.compat.to_dict(),
        }


def _syms(dim):
    return sp.symbols(f"x0:{dim}", real=True)


def linear_combination(a: float, u: TestFunction, b: float, v: TestFunction) -> TestFunction:
    if u.dim != v.dim:
        raise ParameterError("dimension mismatch")
    if u.compact and v.compact:
        c = 0.5 * (u.support_center + v.support_center)
        r = 0.5 * np.linalg.norm(u.support_center - v.support_center) + max(u.support_radius, v.support_radius)
    else:
        c, r = np.zeros(u.dim), np.inf
    return TestFunction(u.dim, a * u.expr + b * v.expr, name=f"{a}*{u.name}+{b}*{v.name}",
                        support_center=c, support_radius=r)


# ---------------------------------------------------------------------------
# plain recipes


def make_test_function(recipe: str, dim: int = 1, **params) -> TestFunction:
    """Plain recipes: ``constant``, ``linear``, ``quadratic``, ``bump``."""
    x = sp.Matrix(_syms(dim))
    if recipe == "constant":
        c = float(params.get("value", 1.0))
        return TestFunction(dim, sp.Float(c), name="constant", params={"value": c})
    if recipe == "linear":
        g = np.asarray(params.get("gradient", np.ones(dim)), dtype=float).reshape(dim)
        c = float(params.get("offset", 0.0))
        expr = sum(float(gi) * xi for gi, xi in zip(g, x)) + c
        return TestFunction(dim, expr, name="linear", params={"gradient": g.tolist(), "offset": c})
    if recipe == "quadratic":
        h = np.asarray(params.get("hessian", np.eye(dim)), dtype=float).reshape(dim, dim)
        h = 0.5 * (h + h.T)
        g = np.asarray(params.get("gradient", np.zeros(dim)), dtype=float).reshape(dim)
        c = float(params.get("offset", 0.0))
        hm = sp.Matrix(h.tolist())
        expr = sp.Rational(1, 2) * (x.T * hm * x)[0, 0] + sum(float(gi) * xi for gi, xi in zip(g, x)) + c
        return TestFunction(dim, sp.expand(expr), name="quadratic",
                            params={"hessian": h.tolist(), "gradient": g.tolist(), "offset": c})
    if recipe == "bump":
        center = np.asarray(params.get("center", np.zeros(dim)), dtype=float).reshape(dim)
        radius = float(params.get("radius", 1.0))
        amp = float(params.get("amplitude", 1.0))
        if radius <= 0.0:
            raise ParameterError("bump radius must be positive")
        t = sum((xi - float(ci)) ** 2 for xi, ci in zip(x, center)) / radius**2
        return TestFunction(dim, amp * sym_bump(t), name="bump",
                            params={"center": center.tolist(), "radius": radius, "amplitude": amp},
                            support_center=center, support_radius=radius)
    raise ParameterError(f"unknown test-function recipe {recipe!r}")


# ---------------------------------------------------------------------------
# compatible recipes


def _m_array(m):
    arr = getattr(m, "m", m)
    return np.atleast_2d(np.asarray(arr, dtype=float))


def _cos_k(domain: Interval, m, k=1, margin=0.5, width=0.5, **_):
    (x,) = _syms(1)
    a, b = domain.a, domain.b
    k = int(k)
    if k < 1:
        raise ParameterError("k must be a positive integer")
    lo, hi = a - margin, b + margin
    env = sym_step((x - (lo - width)) / width) * sym_step(((hi + width) - x) / width)
    expr = sp.cos(k * sp.pi * (x - a) / (b - a)) * env
    center = np.array([0.5 * (a + b)])
    radius = 0.5 * (b - a) + margin + width
    return expr, {"k": k, "margin": margin, "width": width}, center, radius


def _radial(domain: Ball, m, margin=0.5, width=1.0, **_):
    n = domain.dim
    x = sp.Matrix(_syms(n))
    tinv = sp.Matrix(domain.inv.tolist())
    xh = tinv * (x - sp.Matrix(domain.center.tolist()))
    t = sum(c**2 for c in xh)
    r2 = domain.radius**2
    t1, t2 = (domain.radius + margin) ** 2, (domain.radius + margin + width) ** 2
    expr = (t - r2) ** 2 * sym_step((t2 - t) / (t2 - t1))
    smax = float(np.max(np.linalg.svd(domain.transform, compute_uv=False)))
    radius = smax * (domain.radius + margin + width)
    return expr, {"margin": margin, "width": width}, domain.center.copy(), radius


def _halfspace_bump(domain: GraphHalfSpace, m, center=None, tangential_radius=1.5,
                    normal_radius=1.0, correction_radius=0.5, **_):
    marr = _m_array(m)
    n = domain.dim
    scale = np.trace(marr) / n
    if np.max(np.abs(marr - scale * np.eye(n))) > 1e-10 * abs(scale):
        raise UnsupportedError("halfspace_bump needs an isotropic momentum matrix")
    c = np.zeros(n - 1) if center is None else np.asarray(center, dtype=float).reshape(n - 1)
    x = sp.Matrix(_syms(n))
    xi = sp.Matrix(domain.rotation.T.tolist()) * x
    xp = list(xi[: n - 1])
    subs = dict(zip(domain.symbols, xp))
    gamma = domain.gamma_expr.subs(subs)
    dgamma = [sp.diff(domain.gamma_expr, s).subs(subs) for s in domain.symbols]
    s = xi[n - 1] - gamma
    a = sym_bump(sum((p - float(ci)) ** 2 for p, ci in zip(xp, c)) / tangential_radius**2)
    # tangential derivative of a, written in the xi' variables
    ys = sp.symbols(f"y0:{n - 1}", real=True)
    a_y = sym_bump(sum((yy - float(ci)) ** 2 for yy, ci in zip(ys, c)) / tangential_radius**2)
    da = [sp.diff(a_y, yy).subs(dict(zip(ys, xp))) for yy in ys]
    b = sym_bump(s**2 / normal_radius**2)
    e = sym_bump(s**2 / correction_radius**2)
    dot = sum(g * d for g, d in zip(dgamma, da))
    corr = s * e * dot / (1 + sum(g**2 for g in dgamma))
    expr = a * b + corr
    amp = abs(domain.amplitude)
    radius = float(np.sqrt(tangential_radius**2 + (max(normal_radius, correction_radius) + amp) ** 2))
    sc = domain.rotation @ np.concatenate([c, [0.0]])
    params = {"center": c.tolist(), "tangential_radius": tangential_radius,
              "normal_radius": normal_radius, "correction_radius": correction_radius}
    return expr, params, sc, radius


_RECIPES = {
    "cos_k": (Interval, _cos_k),
    "radial": (Ball, _radial),
    "halfspace_bump": (GraphHalfSpace, _halfspace_bump),
}


def make_compatible_function(domain: Domain, m, recipe: str, **params) -> TestFunction:
    """Globally smooth ``u`` with ``M grad u . n = 0`` on the boundary of ``domain``.

    Recipes
    -------
    ``cos_k``
        Interval: ``cos(k pi (x-a)/(b-a))`` times an envelope equal to 1 on
        ``[a - margin, b + margin]``.
    ``radial``
        Ball ``c + T B_R``: ``f(|T^-1 (x-c)|^2)`` with ``f(t) = (t - R^2)^2``
        near the ball, so the gradient vanishes on the boundary for every M.
        Intervals are accepted as one-dimensional balls.
    ``halfspace_bump``
        Graph half-space with isotropic M: a tensor bump in the tangential
        variables and ``s = xi_n - gamma(xi')`` plus a first-order correction
        cancelling the normal derivative on the graph.
    """
    if recipe not in _RECIPES:
        raise ParameterError(f"unknown compatible recipe {recipe!r}")
    cls, builder = _RECIPES[recipe]
    if recipe == "radial" and isinstance(domain, Interval):
        domain_b = Ball(1, center=[0.5 * (domain.a + domain.b)], radius=0.5 * (domain.b - domain.a))
    else:
        domain_b = domain
    if not isinstance(domain_b, cls) or getattr(domain_b, "exterior", False):
        raise UnsupportedError(f"recipe {recipe!r} does not support domain kind {domain.kind!r}")
    marr = _m_array(m)
    if marr.shape != (domain.dim, domain.dim):
        raise ParameterError("momentum matrix dimension does not match the domain")
    expr, used, center, radius = builder(domain_b, m, **params)
    compat = CompatRecord(domain=domain.to_dict(), m=marr.tolist())
    return TestFunction(domain.dim, expr, name=recipe, params=used, support_center=center,
                        support_radius=radius, compat=compat)


def neumann_compat_check(u: TestFunction, domain: Domain, m, boundary_samples: int = 1000) -> float:
    """Worst ``|M grad u . n|`` over ``boundary_samples`` boundary points."""
    if not domain.has_boundary:
        raise ContractError("no boundary")
    pts = domain.boundary_samples(boundary_samples)
    nrm = domain.outward_normal(pts).reshape(pts.shape)
    flux = u.gradient(pts) @ _m_array(m).T
    return float(np.max(np.abs(np.sum(flux * nrm, axis=-1))))


def global_extension(u: TestFunction, domain: Domain) -> TestFunction:
    """Tag the (already global) evaluators of ``u`` as its extension to ``R^n``."""
    if not u.is_global:
        raise UnsupportedError("test function is not globally defined; no extension available")
    return dataclasses.replace(u, extension_of=domain.kind)


def sobolev_norm(u: TestFunction, points, weights, k: int = 3, p: float = 2.0) -> float:
    """``(sum_{|beta| <= k} int |D^beta u|^p)^(1/p)`` by the given quadrature rule."""
    if not 0 <= k <= 3:
        raise ParameterError("k must lie in 0..3")
    if p < 1.0:
        raise ParameterError("p must be >= 1")
    pts = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = u.dim
    total = np.sum(np.abs(u.value(pts)) ** p * w)
    evals = [u.gradient, u.hessian, u.third]
    for order in range(1, k + 1):
        d = evals[order - 1](pts)
        for idx in itertools.combinations_with_replacement(range(n), order):
            total += np.sum(np.abs(d[(...,) + idx]) ** p * w)
    return float(total ** (1.0 / p))


def derivative_consistency(u: TestFunction, points, step: float = 1e-5) -> dict:
    """Central-difference checks ``value -> gradient -> hessian -> third``.

    Returns the relative error of each level, measured against the largest
    magnitude of the analytic derivative over ``points``.  The third-order
    check uses ``10 * step``.
    """
    pts = np.asarray(points, dtype=float)
    n = u.dim
    out = {}
    pairs = [("gradient", u.value, u.gradient, step), ("hessian", u.gradient, u.hessian, step),
             ("third", u.hessian, u.third, 10.0 * step)]
    for name, lower, upper, h in pairs:
        exact = upper(pts)
        fd = np.empty_like(exact)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd[..., i] = (lower(pts + e) - lower(pts - e)) / (2.0 * h)
        scale = max(float(np.max(np.abs(exact))), 1e-300)
        out[name] = float(np.max(np.abs(fd - exact))) / scale
    return out
