"""Pointwise evaluation of the nonlocal operator ``L_eps`` and its local limit.

All integrals are taken in polar coordinates around the evaluation point
``x`` with ``z = y - x``.  Convergence is judged relative to the integral of
the absolute integrand, so values that cancel to (nearly) zero are still
certified.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .domains import Domain
from .errors import ContractError, ParameterError, QuadratureError
from .kernel import KernelFamily
from .moments import MomentumMatrix
from .quadrature import (
    QuadratureConfig,
    QuadratureResult,
    integrate_rays,
    polar_nodes,
    segment_nodes,
    sphere_rule,
)
from .testfunctions import TestFunction

__all__ = [
    "ROUTES",
    "PVResult",
    "EnergyResult",
    "apply_nonlocal_fullspace",
    "apply_nonlocal_pv",
    "apply_nonlocal_domain",
    "apply_local",
    "energy_identity_check",
    "shell_first_moment",
]

ROUTES = ("complement_decomposition", "regularized")

# below this radius (relative to the support scale of u) the regularized
# bracket is replaced by its third-order Taylor polynomial, which avoids
# catastrophic cancellation in u(x) - u(x + z) + grad u(x) . z
_TAYLOR_RADIUS = 1e-4


class PVResult(NamedTuple):
    radii: list
    values: list
    limit: float
    limit_error: float
    cauchy: bool


class EnergyResult(NamedTuple):
    lhs: float
    rhs: float
    relative_gap: float


def _refine(partial, config: QuadratureConfig, label: str, floor: float = 0.0, with_mass: bool = False):
    """Run ``partial(cfg) -> (value, abs_mass)`` at increasing resolution.

    Converged once the fine/coarse difference is below ``rel_tol`` times the
    larger of the absolute mass and ``floor``.
    """
    value = err = 0.0
    for level in range(config.max_refinements + 1):
        cfg = config.refined(level)
        value, mass = partial(cfg)
        coarse, _ = partial(cfg.coarse())
        err = abs(value - coarse)
        if err <= max(config.rel_tol * max(mass, floor), config.abs_tol):
            res = QuadratureResult(float(value), float(err))
            return (res, mass) if with_mass else res
    raise QuadratureError(f"{label}: error estimate {err:.3e} above tolerance", value=value, error_estimate=err)


def _kernel_config(family: KernelFamily, config: QuadratureConfig) -> QuadratureConfig:
    return config.with_alpha(family.density.alpha)


def _extent(family: KernelFamily, config: QuadratureConfig):
    if family.density.compact:
        return family.extent
    if isinstance(config.far_truncation, str):
        raise ParameterError("non-compact density needs a numeric far_truncation")
    return family.epsilon * float(config.far_truncation)


def _reach(family: KernelFamily, config: QuadratureConfig) -> float:
    """Radius of the ball around ``x`` carrying the kernel."""
    if family.density.compact:
        return family.support_radius
    return family.epsilon * float(config.far_truncation)


@lru_cache(maxsize=64)
def _fullspace_nodes(family: KernelFamily, cfg: QuadratureConfig):
    dirs, r, w = polar_nodes(family.dim, cfg, _extent(family, cfg), family.split_radius(cfg))
    z = r[..., None] * dirs[:, None, :]
    return z, r, w * family.kernel_along(dirs, r)


def _bracket(u: TestFunction, x, z, r):
    """``u(x) - u(x + z) + grad u(x) . z`` with a Taylor branch for tiny ``|z|``."""
    u0 = float(u.value(x))
    g = u.gradient(x)
    exact = u0 - u.value(x + z) + z @ g
    r_t = _TAYLOR_RADIUS * (min(1.0, u.support_radius))
    small = r < r_t
    if np.any(small):
        h = u.hessian(x)
        t3 = u.third(x)
        zs = z[small]
        quad = 0.5 * np.einsum("ki,ij,kj->k", zs, h, zs)
        cub = np.einsum("ki,kj,kl,ijl->k", zs, zs, zs, t3) / 6.0
        exact[small] = -(quad + cub)
    return exact


def apply_nonlocal_fullspace(u: TestFunction, family: KernelFamily, x,
                             config: QuadratureConfig = QuadratureConfig()) -> QuadratureResult:
    """``int J_eps(x - y) (u(x) - u(y) - grad u(x) . (x - y)) dy`` over ``R^n``.

    The integrand is absolutely integrable, so no principal value is needed.
    """
    return _fullspace(u, family, x, config)[0]


def _fullspace(u, family, x, config):
    x = np.asarray(x, dtype=float).reshape(u.dim)
    cfg0 = _kernel_config(family, config)

    def partial(cfg):
        z, r, wj = _fullspace_nodes(family, cfg)
        contrib = wj * _bracket(u, x, z, r)
        return float(np.sum(contrib)), float(np.sum(np.abs(contrib)))

    return _refine(partial, cfg0, "apply_nonlocal_fullspace", with_mass=True)


def _shell_nodes(family: KernelFamily, cfg: QuadratureConfig, r_min: float):
    dirs, aw = sphere_rule(family.dim, cfg.angular_nodes)
    ext = _extent(family, cfg)
    ends = ext(dirs) if callable(ext) else np.full(len(dirs), float(ext))
    starts = np.full(len(dirs), float(r_min))
    ends = np.maximum(ends, starts)
    r, w = segment_nodes(starts, ends, cfg, family.dim)
    w = w * aw[:, None] * family.kernel_along(dirs, r)
    return dirs, r, w


def _pv_value(u, family, x, r_min, cfg0):
    u0 = float(u.value(x))

    def partial(cfg):
        dirs, r, w = _shell_nodes(family, cfg, r_min)
        y = x + r[..., None] * dirs[:, None, :]
        contrib = w * (u0 - u.value(y))
        return float(np.sum(contrib)), float(np.sum(np.abs(contrib)))

    return _refine(partial, cfg0, "apply_nonlocal_pv")


def _richardson(radii, values, exponents):
    """Fit ``V(r) = V0 + sum_j c_j r**e_j`` through the given points; return ``V0``."""
    a = np.column_stack([np.ones(len(radii))] + [np.asarray(radii) ** e for e in exponents])
    sol = np.linalg.solve(a, np.asarray(values))
    return float(sol[0])


def apply_nonlocal_pv(u: TestFunction, family: KernelFamily, x, r_sequence=None,
                      config: QuadratureConfig = QuadratureConfig(), extrapolation_terms: int = 3,
                      cauchy_tol: float = 1e-6) -> PVResult:
    """Truncated integrals ``int_{|x-y| >= r} J_eps(x - y)(u(x) - u(y)) dy`` and their limit.

    The truncation error behaves like ``sum_j c_j r**(q + n + 2j)`` where
    ``rho ~ |x|**q`` at the origin; the limit is obtained by Richardson
    extrapolation on the last ``extrapolation_terms + 1`` radii.  ``cauchy``
    reports whether extrapolations from the two trailing windows agree
    within ``cauchy_tol`` (relative).
    """
    x = np.asarray(x, dtype=float).reshape(u.dim)
    cfg0 = _kernel_config(family, config)
    if r_sequence is None:
        r_sequence = [0.25 * family.epsilon * 2.0**-k for k in range(6)]
    radii = [float(r) for r in r_sequence]
    if any(r <= 0.0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("r_sequence must be strictly decreasing and positive")
    reach = _reach(family, cfg0)
    values = []
    for r in radii:
        values.append(0.0 if r >= reach else _pv_value(u, family, x, r, cfg0).value)
    k = extrapolation_terms
    if len(radii) < k + 1:
        raise ParameterError(f"need at least {k + 1} radii for extrapolation")
    q = family.density.origin_exponent
    n = family.dim
    exps = [q + n + 2 * j for j in range(k)]
    limit = _richardson(radii[-(k + 1):], values[-(k + 1):], exps)
    if len(radii) >= k + 2:
        prev = _richardson(radii[-(k + 2):-1], values[-(k + 2):-1], exps)
        limit_err = abs(limit - prev)
    else:
        limit_err = abs(values[-1] - limit)
    scale = max(abs(limit), max(abs(v) for v in values), 1e-300)
    return PVResult(radii, values, limit, limit_err, bool(limit_err <= cauchy_tol * scale))


def _region(g, family, domain, x, cfg0, inside, floor=0.0, label="region integral"):
    """Kernel-weighted ray integral ``int J_eps(z) g(z) dz`` over the selected region."""
    ext = _extent(family, cfg0)
    r_max = ext if callable(ext) else float(ext)

    def integrand(dirs, r, y):
        return family.kernel_along(dirs, r) * g(dirs, r, y)

    return integrate_rays(integrand, domain, x, r_max, cfg0, inside=inside, floor=floor, label=label)


def _complement_integral(u, family, domain, x, cfg0, floor=0.0):
    u0 = float(u.value(x))
    res = _region(lambda dirs, r, y: u0 - u.value(y), family, domain, x, cfg0, False, floor,
                  "complement integral")
    return QuadratureResult(res.value, res.error_estimate)


def _regularized_domain(u, family, domain, x, cfg0):
    g = u.gradient(x)

    def bracket(dirs, r, y):
        z = y - x
        return _bracket(u, x, z.reshape(-1, u.dim), r.ravel()).reshape(r.shape)

    def grad_term(dirs, r, y):
        # int_Omega J grad u(x).(x - y) = -int_{complement} J grad u(x).(x - y)
        return (y - x) @ g

    inner = _region(bracket, family, domain, x, cfg0, True, label="regularized route (domain)")
    outer = _region(grad_term, family, domain, x, cfg0, False, floor=inner.mass,
                    label="regularized route (complement)")
    return QuadratureResult(inner.value + outer.value, inner.error_estimate + outer.error_estimate)


def apply_nonlocal_domain(u: TestFunction, family: KernelFamily, domain: Domain, x,
                          route: str = "complement_decomposition",
                          config: QuadratureConfig = QuadratureConfig()) -> QuadratureResult:
    """Principal value ``int_Omega J_eps(x - y)(u(x) - u(y)) dy`` at an interior ``x``.

    ``complement_decomposition`` subtracts the complement integral of the
    global extension from the full-space value; ``regularized`` integrates
    the regularized bracket over the domain and recovers the gradient term
    from the complement by evenness of the kernel.
    """
    if route not in ROUTES:
        raise ParameterError(f"unknown route {route!r}; expected one of {ROUTES}")
    x = domain.require_interior(x)
    if not u.is_global:
        raise ContractError("u needs a global extension for domain evaluation")
    cfg0 = _kernel_config(family, config)
    if not domain.has_boundary:
        return apply_nonlocal_fullspace(u, family, x, config)
    if route == "complement_decomposition":
        full, mass = _fullspace(u, family, x, config)
        if float(domain.boundary_distance(x)) >= _reach(family, cfg0):
            return full
        # judged against the full-space scale: the correction only matters relative to it
        corr = _complement_integral(u, family, domain, x, cfg0, floor=mass)
        return QuadratureResult(full.value - corr.value, full.error_estimate + corr.error_estimate)
    return _regularized_domain(u, family, domain, x, cfg0)


def apply_local(u: TestFunction, m, x) -> float:
    """``-M : D^2 u(x)``."""
    marr = m.m if isinstance(m, MomentumMatrix) else np.atleast_2d(np.asarray(m, dtype=float))
    x = np.asarray(x, dtype=float).reshape(u.dim)
    return float(-np.sum(marr * u.hessian(x)))


def shell_first_moment(family: KernelFamily, r_min: float, v,
                       config: QuadratureConfig = QuadratureConfig()) -> QuadratureResult:
    """``int_{|z| >= r_min} J_eps(z) (v . z) dz``; vanishes for even kernels."""
    v = np.asarray(v, dtype=float).reshape(family.dim)
    cfg0 = _kernel_config(family, config)

    def partial(cfg):
        dirs, r, w = _shell_nodes(family, cfg, r_min)
        contrib = w * (r * (dirs @ v)[:, None])
        return float(np.sum(contrib)), float(np.sum(np.abs(contrib)))

    return _refine(partial, cfg0, "shell_first_moment")


def energy_identity_check(u: TestFunction, family: KernelFamily, domain: Domain, grid=None,
                          config: QuadratureConfig = QuadratureConfig(),
                          route: str = "complement_decomposition") -> EnergyResult:
    """Compare ``int_Omega L u * u`` with ``1/2 int int J_eps(x - y)|u(x) - u(y)|^2``.

    ``grid`` is an optional ``(points, weights)`` rule on the domain; by
    default the domain's own volume rule is used.
    """
    if not domain.is_bounded:
        raise ContractError("energy identity needs a bounded domain")
    pts, wts = domain.volume_rule(0) if grid is None else grid
    pts = np.asarray(pts, dtype=float).reshape(-1, domain.dim)
    wts = np.asarray(wts, dtype=float).ravel()
    cfg0 = _kernel_config(family, config)
    lhs = rhs = 0.0
    for x, w in zip(pts, wts):
        lu = apply_nonlocal_domain(u, family, domain, x, route, config).value
        u0 = float(u.value(x))

        inner = _region(lambda dirs, r, y, u0=u0: (u0 - u.value(y)) ** 2, family, domain, x, cfg0,
                        True, label="energy inner integral").value
        lhs += w * lu * u0
        rhs += 0.5 * w * inner
    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return EnergyResult(float(lhs), float(rhs), float(gap))
