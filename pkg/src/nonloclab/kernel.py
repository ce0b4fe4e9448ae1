"""Densities ``rho``, their scaled families and the kernels ``J = rho / |x|^2``.

Densities are plain closed-form evaluators bundled with the singularity
metadata the growth and decay conditions are phrased in (``alpha``, ``N``,
``c0``, ``c1``, support radius).  The metadata is declared by the
constructors and checked by the ``check_*`` certification functions; it is
never inferred from samples.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import CertificationError, ParameterError, QuadratureError, SingularityError
from .quadrature import (
    QuadratureConfig,
    gauss_legendre,
    integrate_singular,
    log_rule,
    sphere_measure,
    sphere_rule,
)

__all__ = [
    "DensitySpec",
    "KernelFamily",
    "CheckRecord",
    "eval_scaled_density",
    "eval_scaled_kernel",
    "make_bump_density",
    "make_singular_bump_density",
    "make_polynomial_density",
    "make_fractional_density",
    "make_anisotropic_density",
    "make_shifted_pair_density",
    "check_evenness",
    "check_integrability",
    "check_growth_bounds",
    "check_dirac_property",
    "shell_directions",
]

_SHELLS = 512
_SHELL_DIRECTIONS = 64
_C_MARGIN = 1.05


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """An even, nonnegative density on R^n with declared singularity data.

    ``eval`` and ``grad_eval`` take points of shape ``(..., dim)``.
    ``origin_exponent`` is the power ``q`` with ``rho(x) ~ |x|**q`` at the
    origin (``2 - alpha - dim`` for a genuine singularity, 0 for a density
    that is finite and positive there); it fixes the exponents of the
    principal-value extrapolation.  ``extent`` maps unit directions to the
    support length along each ray.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    grad_eval: Callable[[np.ndarray], np.ndarray]
    alpha: float
    big_n: float
    c0: float
    c1: float
    support_radius: float
    is_radial: bool
    origin_exponent: float = 0.0
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    extent_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mass: Optional[float] = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ParameterError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not 0.0 < self.alpha < 2.0:
            raise ParameterError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.big_n > 3.0 - self.alpha:
            raise ParameterError(f"N = {self.big_n} must exceed 3 - alpha = {3.0 - self.alpha}")
        if not (self.c0 > 0.0 and self.c1 > 0.0):
            raise ParameterError("c0 and c1 must be positive")
        if not self.support_radius > 0.0:
            raise ParameterError("support_radius must be positive")

    @property
    def compact(self) -> bool:
        return math.isfinite(self.support_radius)

    def extent(self, dirs: np.ndarray) -> np.ndarray:
        """Support length along each unit direction in ``dirs``."""
        dirs = np.asarray(dirs, dtype=float)
        if self.extent_fn is not None:
            return np.asarray(self.extent_fn(dirs), dtype=float)
        return np.full(dirs.shape[:-1], self.support_radius)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            **self.params,
            "alpha": self.alpha,
            "big_n": self.big_n,
            "c0": self.c0,
            "c1": self.c1,
            "support_radius": self.support_radius if self.compact else "inf",
            "is_radial": self.is_radial,
        }


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """The scaled pair ``rho_eps(x) = eps**-n rho(x / eps)``, ``J_eps = rho_eps / |x|^2``."""

    density: DensitySpec
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def dim(self) -> int:
        return self.density.dim

    def rho(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        eps = self.epsilon
        return self.density.eval(x / eps) / eps**self.dim

    def kernel(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        if np.any(r2 == 0.0):
            raise SingularityError("kernel J_eps is singular at x = 0")
        return self.rho(x) / r2

    def kernel_along(self, dirs, r) -> np.ndarray:
        """``J_eps(r * omega)`` for unit ``dirs`` (K, n) and radii ``r`` (K, ...)."""
        dirs = np.asarray(dirs, dtype=float)
        r = np.asarray(r, dtype=float)
        shape = dirs.shape[:1] + (1,) * (r.ndim - 1) + dirs.shape[1:]
        pts = r[..., None] * dirs.reshape(shape)
        return self.rho(pts) / (r * r)

    def extent(self, dirs) -> np.ndarray:
        return self.epsilon * self.density.extent(dirs)

    @property
    def support_radius(self) -> float:
        return self.epsilon * self.density.support_radius

    def split_radius(self, config: QuadratureConfig) -> float:
        return config.near_split_factor * self.epsilon


def eval_scaled_density(family: KernelFamily, x) -> np.ndarray:
    """``eps**-n * rho(x / eps)``."""
    return family.rho(x)


def eval_scaled_kernel(family: KernelFamily, x) -> np.ndarray:
    """``rho_eps(x) / |x|^2``; raises :class:`SingularityError` at ``x = 0``."""
    return family.kernel(x)


# ---------------------------------------------------------------------------
# radial building blocks


def _bump(t):
    """exp(-1 / (1 - t)) for t < 1, else 0 (t = |x|^2 / R^2)."""
    t = np.asarray(t, dtype=float)
    inside = t < 1.0
    s = np.where(inside, 1.0 - t, 1.0)
    return np.where(inside, np.exp(-1.0 / s), 0.0)


def _bump_dt(t):
    t = np.asarray(t, dtype=float)
    inside = t < 1.0
    s = np.where(inside, 1.0 - t, 1.0)
    return np.where(inside, -np.exp(-1.0 / s) / (s * s), 0.0)


def _smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 1e-300, 1.0 - 1e-16)
    a = np.exp(-1.0 / tc)
    b = np.exp(-1.0 / (1.0 - tc))
    out = a / (a + b)
    return np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, out))


def _smoothstep_dt(t):
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 1e-3, 1.0 - 1e-3)
    a = np.exp(-1.0 / tc)
    b = np.exp(-1.0 / (1.0 - tc))
    da = a / tc**2
    db = -b / (1.0 - tc) ** 2
    out = (da * b - a * db) / (a + b) ** 2
    return np.where((t <= 1e-3) | (t >= 1.0 - 1e-3), 0.0, out)


def _radial_density(dim, profile, dprofile, **kwargs) -> DensitySpec:
    """Wrap a radial profile ``rho(r)`` (with derivative) into a DensitySpec."""

    def ev(x):
        x = np.asarray(x, dtype=float)
        return profile(np.sqrt(np.sum(x * x, axis=-1)))

    def grad(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        safe = np.where(r > 0.0, r, 1.0)
        return (dprofile(safe) / safe)[..., None] * x

    return _with_bounds(DensitySpec(dim=dim, eval=ev, grad_eval=grad, is_radial=True,
                                    c0=1.0, c1=1.0, **kwargs))


def _radial_mass(dim, profile, radius, power=0.0) -> float:
    """``|S^{n-1}| * int_0^R profile(r) r**(power + n - 1) dr`` (algebraic weight at 0)."""
    f = lambda r: float(profile(np.array(r)))
    val, _ = integrate.quad(f, 0.0, radius, weight="alg", wvar=(power + dim - 1.0, 0.0),
                            epsabs=0.0, epsrel=1e-13, limit=500)
    return sphere_measure(dim) * float(val)


def shell_directions(dim: int, count: int = _SHELL_DIRECTIONS) -> np.ndarray:
    """Deterministic, roughly uniform unit directions for shell sampling."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    i = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / count)
    th = np.pi * (1.0 + 5.0**0.5) * i
    return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=-1)


def _shell_points(dim, shells, directions=_SHELL_DIRECTIONS):
    radii = np.logspace(-6.0, 0.0, shells)
    dirs = shell_directions(dim, directions)
    return radii, radii[:, None, None] * dirs[None, :, :]


def _growth_ratios(density: DensitySpec, shells: int, directions: int = _SHELL_DIRECTIONS):
    radii, pts = _shell_points(density.dim, shells, directions)
    r = radii[:, None]
    n, a = density.dim, density.alpha
    decay = 1.0 if density.compact else (1.0 + r) ** (-density.big_n)
    b0 = r ** (2.0 - a - n) * decay
    b1 = r ** (1.0 - a - n) * decay
    rho = np.abs(density.eval(pts))
    grad = np.linalg.norm(density.grad_eval(pts), axis=-1)
    return rho / b0, grad / b1


def _with_bounds(spec: DensitySpec) -> DensitySpec:
    """Replace c0, c1 by shell-sampled witnesses (with a 5% margin)."""
    q0, q1 = _growth_ratios(spec, _SHELLS)
    c0 = max(_C_MARGIN * float(np.max(q0)), 1e-12)
    c1 = max(_C_MARGIN * float(np.max(q1)), 1e-12)
    return dataclasses.replace(spec, c0=c0, c1=c1)


# ---------------------------------------------------------------------------
# constructors


def make_bump_density(dim: int = 1, mass: Optional[float] = None, alpha: float = 1.0,
                      radius: float = 1.0) -> DensitySpec:
    """Smooth compactly supported ``kappa * exp(-1 / (1 - |x|^2 / R^2))``.

    ``mass`` is the L1 norm (default ``2 * dim``, which makes the momentum
    matrix the identity).  The density is bounded, so the declared ``alpha``
    must satisfy ``2 - alpha - dim <= 0``.
    """
    if mass is None:
        mass = 2.0 * dim
    if not mass > 0.0 or not radius > 0.0:
        raise ParameterError("mass and radius must be positive")
    if 2.0 - alpha - dim > 0.0:
        raise ParameterError(f"a bounded density needs alpha >= 2 - dim, got alpha={alpha}")
    unit = lambda r: _bump((r / radius) ** 2)
    kappa = mass / _radial_mass(dim, unit, radius)
    profile = lambda r: kappa * _bump((r / radius) ** 2)
    dprofile = lambda r: kappa * _bump_dt((r / radius) ** 2) * 2.0 * r / radius**2
    return _radial_density(
        dim, profile, dprofile, alpha=float(alpha), big_n=4.0, support_radius=float(radius),
        origin_exponent=0.0, kind="bump",
        params={"mass": float(mass), "radius": float(radius)}, mass=float(mass),
    )


def make_singular_bump_density(dim: int = 1, alpha: float = 1.5, mass: Optional[float] = None,
                               radius: float = 1.0) -> DensitySpec:
    """``kappa * |x|**(2 - alpha - n) * bump(|x| / R)``: a genuinely singular density."""
    if mass is None:
        mass = 2.0 * dim
    if not 0.0 < alpha < 2.0:
        raise ParameterError(f"alpha must lie in (0, 2), got {alpha}")
    q = 2.0 - alpha - dim
    unit = lambda r: _bump((r / radius) ** 2)
    kappa = mass / _radial_mass(dim, unit, radius, power=q)

    def profile(r):
        return kappa * r**q * _bump((r / radius) ** 2)

    def dprofile(r):
        t = (r / radius) ** 2
        return kappa * (q * r ** (q - 1.0) * _bump(t) + r**q * _bump_dt(t) * 2.0 * r / radius**2)

    return _radial_density(
        dim, profile, dprofile, alpha=float(alpha), big_n=4.0, support_radius=float(radius),
        origin_exponent=q, kind="singular_bump",
        params={"mass": float(mass), "radius": float(radius)}, mass=float(mass),
    )


def make_polynomial_density(dim: int = 1, degree: int = 3, mass: Optional[float] = None,
                            alpha: float = 1.0, radius: float = 1.0) -> DensitySpec:
    """``kappa * (1 - |x|^2 / R^2)**degree`` on the ball of radius R (C^1 for degree >= 2)."""
    if mass is None:
        mass = 2.0 * dim
    if degree < 2:
        raise ParameterError("degree must be >= 2 for a C^1 density")
    if 2.0 - alpha - dim > 0.0:
        raise ParameterError(f"a bounded density needs alpha >= 2 - dim, got alpha={alpha}")
    unit = lambda r: np.clip(1.0 - (r / radius) ** 2, 0.0, None) ** degree
    kappa = mass / _radial_mass(dim, unit, radius)
    profile = lambda r: kappa * unit(r)
    dprofile = lambda r: (-kappa * degree * np.clip(1.0 - (r / radius) ** 2, 0.0, None) ** (degree - 1)
                          * 2.0 * r / radius**2)
    return _radial_density(
        dim, profile, dprofile, alpha=float(alpha), big_n=4.0, support_radius=float(radius),
        origin_exponent=0.0, kind="polynomial",
        params={"mass": float(mass), "radius": float(radius), "degree": int(degree)},
        mass=float(mass),
    )


def make_fractional_density(s: float, cutoff_radius: float = 1.0, transition_width: float = 1.0,
                            dim: int = 1) -> DensitySpec:
    """``|x|**(2 - n - 2s) * chi(x)`` with a smooth radial cutoff ``chi``.

    ``chi`` equals 1 on the ball of radius ``cutoff_radius`` and vanishes
    outside ``cutoff_radius + transition_width``; the declared data are
    ``alpha = 2s`` and ``N = 5 - 2s``.
    """
    if not 0.0 < s < 1.0:
        raise ParameterError(f"s must lie in (0, 1), got {s}")
    if not (cutoff_radius > 0.0 and transition_width > 0.0):
        raise ParameterError("cutoff_radius and transition_width must be positive")
    q = 2.0 - dim - 2.0 * s
    R, w = float(cutoff_radius), float(transition_width)

    def chi(r):
        return 1.0 - _smoothstep((r - R) / w)

    def dchi(r):
        return -_smoothstep_dt((r - R) / w) / w

    def profile(r):
        r = np.asarray(r, dtype=float)
        return r**q * chi(r)

    def dprofile(r):
        r = np.asarray(r, dtype=float)
        return q * r ** (q - 1.0) * chi(r) + r**q * dchi(r)

    return _radial_density(
        dim, profile, dprofile, alpha=2.0 * s, big_n=4.0 - 2.0 * s + 1.0,
        support_radius=R + w, origin_exponent=q, kind="fractional",
        params={"s": float(s), "cutoff_radius": R, "transition_width": w},
    )


def _check_b_matrix(b, dim):
    b = np.asarray(b, dtype=float)
    if b.shape != (dim, dim):
        raise ParameterError(f"b_matrix must have shape ({dim}, {dim})")
    if np.max(np.abs(b - b.T)) > 1e-12 * max(1.0, np.max(np.abs(b))):
        raise ParameterError("b_matrix must be symmetric")
    lam = np.linalg.eigvalsh(0.5 * (b + b.T))
    if np.min(lam) <= 0.0:
        raise ParameterError("b_matrix must be positive definite")
    if abs(np.linalg.det(b) - 1.0) > 1e-10:
        raise ParameterError(f"b_matrix must have determinant 1, got {np.linalg.det(b)}")
    return 0.5 * (b + b.T)


def make_anisotropic_density(base: DensitySpec, b_matrix) -> DensitySpec:
    """``rho(x) = base(Bx) |x|^2 / |Bx|^2`` so that ``J(x) = base(Bx) / |Bx|^2``.

    ``base`` must be radial and ``B`` symmetric positive definite with
    determinant one.  With ``||base||_1 = 2n`` the momentum matrix becomes
    ``B**-2``.
    """
    if not base.is_radial:
        raise ParameterError("anisotropic construction needs a radial base density")
    B = _check_b_matrix(b_matrix, base.dim)
    lam_min = float(np.min(np.linalg.eigvalsh(B)))

    def ev(x):
        x = np.asarray(x, dtype=float)
        bx = x @ B
        r2 = np.sum(x * x, axis=-1)
        b2 = np.sum(bx * bx, axis=-1)
        ratio = np.where(b2 > 0.0, r2 / np.where(b2 > 0.0, b2, 1.0), 1.0)
        return base.eval(bx) * ratio

    def grad(x):
        x = np.asarray(x, dtype=float)
        bx = x @ B
        r2 = np.sum(x * x, axis=-1)[..., None]
        b2 = np.sum(bx * bx, axis=-1)[..., None]
        b2 = np.where(b2 > 0.0, b2, 1.0)
        g_base = base.grad_eval(bx) @ B
        ratio = r2 / b2
        d_ratio = 2.0 * x / b2 - 2.0 * r2 * (bx @ B) / b2**2
        return g_base * ratio + base.eval(bx)[..., None] * d_ratio

    def extent(dirs):
        bd = np.asarray(dirs) @ B
        nb = np.linalg.norm(bd, axis=-1)
        return base.extent(bd / nb[..., None]) / nb

    spec = DensitySpec(
        dim=base.dim, eval=ev, grad_eval=grad, alpha=base.alpha, big_n=base.big_n,
        c0=1.0, c1=1.0, support_radius=base.support_radius / lam_min, is_radial=False,
        origin_exponent=base.origin_exponent, kind="anisotropic",
        params={"base": base.to_dict(), "b_matrix": B.tolist()},
        extent_fn=extent if base.compact else None, mass=None,
    )
    return _with_bounds(spec)


def make_shifted_pair_density(base: DensitySpec, shift) -> DensitySpec:
    """Even two-bump density ``(base(x - x0) + base(x + x0)) / 2``.

    Even and integrable, but its first tangential moments do not cancel in
    general; used as a negative control for the moment-cancellation check.
    """
    x0 = np.asarray(shift, dtype=float).reshape(base.dim)
    if not base.compact:
        raise ParameterError("shifted pair needs a compactly supported base")
    if np.linalg.norm(x0) <= base.support_radius:
        raise ParameterError("|shift| must exceed the base support radius (density vanishes near 0)")

    def ev(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (base.eval(x - x0) + base.eval(x + x0))

    def grad(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (base.grad_eval(x - x0) + base.grad_eval(x + x0))

    spec = DensitySpec(
        dim=base.dim, eval=ev, grad_eval=grad, alpha=base.alpha, big_n=base.big_n,
        c0=1.0, c1=1.0, support_radius=float(np.linalg.norm(x0) + base.support_radius),
        is_radial=False, origin_exponent=0.0, kind="shifted_pair",
        params={"base": base.to_dict(), "shift": x0.tolist()},
        mass=base.mass,
    )
    return _with_bounds(spec)


# ---------------------------------------------------------------------------
# certification


@dataclass
class CheckRecord:
    """Outcome of one certification check."""

    check: str
    passed: bool
    worst_ratio: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "pass": bool(self.passed),
            "worst_ratio": float(self.worst_ratio),
            "detail": self.detail,
        }


def check_evenness(density: DensitySpec, samples: int = 1000, seed: int = 0,
                   rtol: float = 1e-12) -> CheckRecord:
    """Sample ``rho(x) == rho(-x)`` and ``rho >= 0`` at random points."""
    rng = np.random.default_rng(seed)
    scale = density.support_radius if density.compact else 3.0
    x = rng.uniform(-scale, scale, size=(samples, density.dim))
    a, b = density.eval(x), density.eval(-x)
    gap = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    gap = np.where((a == 0.0) & (b == 0.0), 0.0, gap)
    worst = float(np.max(gap))
    nonneg = bool(np.all(a >= 0.0))
    return CheckRecord("evenness", worst <= rtol and nonneg, worst,
                       {"samples": samples, "seed": seed, "nonnegative": nonneg})


def _shell_mass(density, r_lo, r_hi, weight=lambda r: 1.0, nodes=24):
    dirs, aw = sphere_rule(density.dim, 64)
    t, w = gauss_legendre(nodes)
    r = r_lo + (r_hi - r_lo) * t
    pts = r[None, :, None] * dirs[:, None, :]
    vals = density.eval(pts) * r[None, :] ** (density.dim - 1) * weight(r)[None, :]
    return float(np.sum(aw[:, None] * (r_hi - r_lo) * w[None, :] * vals))


def check_integrability(density: DensitySpec, config: QuadratureConfig = QuadratureConfig(),
                        tail_tol: float = 1e-8) -> CheckRecord:
    """Estimate ``int rho(x) (1 + |x|) dx`` and certify that it is finite.

    The near-origin behaviour is probed on dyadic shells ``[2**-k-1, 2**-k]``:
    for an integrable singularity the shell masses shrink geometrically, a
    ratio close to one signals ``alpha >= 2``.
    """
    weight = lambda r: 1.0 + r
    masses = np.array([_shell_mass(density, 2.0 ** -(k + 1), 2.0**-k, weight) for k in range(8, 40)])
    nz = masses[:-1] > 0.0
    ratios = np.where(nz, masses[1:] / np.where(nz, masses[:-1], 1.0), 0.0)
    tail_ratio = float(np.max(ratios[-8:])) if len(ratios) else 0.0
    if tail_ratio >= 0.99:
        return CheckRecord("integrability", False, tail_ratio,
                           {"reason": "near-origin shell masses do not decay (alpha >= 2 behaviour)",
                            "shell_ratio": tail_ratio})
    cfg = config.with_alpha(density.alpha)
    if density.compact:
        extent, tail = density.extent, 0.0
    else:
        if isinstance(config.far_truncation, str):
            raise ParameterError("non-compact density needs a numeric far_truncation")
        T = float(config.far_truncation)
        extent = T
        tail = _shell_mass(density, T, 2.0 * T, weight, nodes=48)
    try:
        res = integrate_singular(
            lambda z: density.eval(z) * (1.0 + np.linalg.norm(z, axis=-1)),
            density.dim, cfg, extent=extent, split_radius=cfg.near_split_factor,
        )
    except QuadratureError as exc:
        return CheckRecord("integrability", False, math.inf, {"reason": str(exc)})
    value = res.value
    ok = math.isfinite(value) and tail <= tail_tol * max(value, 1e-300)
    return CheckRecord("integrability", ok, tail / max(value, 1e-300),
                       {"value": value, "error_estimate": res.error_estimate,
                        "tail_estimate": tail, "shell_ratio": tail_ratio})


def check_growth_bounds(density: DensitySpec, sample_count: int = _SHELLS) -> CheckRecord:
    """Verify the growth bounds on ``rho`` and ``grad rho`` on log-spaced shells in the unit ball.

    Compactly supported densities are tested without the decay factor.
    """
    if sample_count < 1:
        raise ParameterError("sample_count must be positive")
    q0, q1 = _growth_ratios(density, sample_count)
    r0 = float(np.max(q0)) / density.c0
    r1 = float(np.max(q1)) / density.c1
    worst = max(r0, r1)
    return CheckRecord("growth_bounds", worst <= 1.0, worst,
                       {"rho_ratio": r0, "grad_ratio": r1, "shells": sample_count,
                        "compact_form": density.compact, "alpha": density.alpha,
                        "c0": density.c0, "c1": density.c1})


def check_dirac_property(density: DensitySpec, delta: float, epsilons,
                         config: QuadratureConfig = QuadratureConfig()) -> list[float]:
    """Tail masses ``int_{|x| > delta} rho_eps`` for each epsilon.

    ``delta = 0`` gives the full mass.  Compactly supported densities give
    exactly 0 once ``eps * R_supp <= delta``.
    """
    eps = [float(e) for e in epsilons]
    if any(e <= 0.0 for e in eps):
        raise ParameterError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ParameterError("epsilons must be strictly decreasing")
    if delta < 0.0:
        raise ParameterError("delta must be nonnegative")
    out = []
    cfg = config.with_alpha(density.alpha)
    for e in eps:
        fam = KernelFamily(density, e)
        if delta == 0.0:
            if density.compact:
                ext = fam.extent
            elif isinstance(cfg.far_truncation, str):
                raise ParameterError("non-compact density needs a numeric far_truncation")
            else:
                ext = e * float(cfg.far_truncation)
            out.append(integrate_singular(fam.rho, density.dim, cfg, extent=ext,
                                          split_radius=fam.split_radius(cfg)).value)
            continue
        out.append(_tail_mass(fam, delta, cfg))
    return out


def _tail_mass(fam: KernelFamily, delta: float, cfg: QuadratureConfig) -> float:
    dim = fam.dim
    dirs, aw = sphere_rule(dim, cfg.angular_nodes)
    if fam.density.compact:
        ends = fam.extent(dirs)
    else:
        ends = np.full(len(dirs), fam.epsilon * float(cfg.far_truncation))
    if np.all(ends <= delta):
        return 0.0
    tau, wt = log_rule(cfg.radial_nodes, cfg.segment_panels, cfg.edge_panels)
    a = delta
    b = np.maximum(ends, delta)[:, None]
    ratio = np.log(b / a)
    r = a * np.exp(ratio * tau[None, :])
    w = r * ratio * wt[None, :] * r ** (dim - 1)
    vals = fam.kernel_along(dirs, r) * r * r
    return float(np.sum(aw[:, None] * w * vals))
