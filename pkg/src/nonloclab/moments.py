"""Momentum matrix ``M = 1/2 int J(z) z (x) z dz``, its square root, and moment cancellation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation
from scipy.stats import qmc

from .errors import CertificationError, ParameterError, QuadratureError
from .kernel import DensitySpec
from .quadrature import QuadratureConfig, converged, gauss_legendre, integrate_singular

__all__ = [
    "MomentumMatrix",
    "momentum_matrix",
    "sqrt_spd",
    "moment_cancellation_check",
    "default_rotations",
    "DEFAULT_ZN_SAMPLES",
]

DEFAULT_ZN_SAMPLES = (-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class MomentumMatrix:
    dim: int
    m: np.ndarray
    a: np.ndarray

    @classmethod
    def from_matrix(cls, m) -> "MomentumMatrix":
        m = np.atleast_2d(np.asarray(m, dtype=float))
        return cls(dim=m.shape[0], m=m, a=sqrt_spd(m))

    @classmethod
    def scalar(cls, value: float, dim: int = 1) -> "MomentumMatrix":
        return cls.from_matrix(value * np.eye(dim))

    def to_dict(self) -> dict:
        return {"m": self.m.tolist(), "a": self.a.tolist(), "dim": self.dim}


def sqrt_spd(m) -> np.ndarray:
    """Unique symmetric positive definite square root via ``eigh``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError("sqrt_spd needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > 1e-12 * scale:
        raise ParameterError("sqrt_spd needs a symmetric matrix")
    lam, vec = np.linalg.eigh(0.5 * (m + m.T))
    if np.min(lam) <= 0.0:
        raise ParameterError(f"matrix is not positive definite (smallest eigenvalue {np.min(lam):.3e})")
    root = (vec * np.sqrt(lam)) @ vec.T
    return 0.5 * (root + root.T)


def momentum_matrix(density: DensitySpec, config: QuadratureConfig = QuadratureConfig()) -> MomentumMatrix:
    """Compute ``M_ij = 1/2 int rho(z) z_i z_j / |z|^2 dz`` and ``A = sqrt(M)``.

    Raises :class:`CertificationError` when the symmetrised result is not
    positive definite (smallest eigenvalue below ``1e-12 * trace``).
    """
    n = density.dim
    cfg = config.with_alpha(density.alpha)
    if density.compact:
        extent = density.extent
    elif isinstance(cfg.far_truncation, str):
        raise ParameterError("non-compact density needs a numeric far_truncation")
    else:
        extent = float(cfg.far_truncation)

    def integrand(z):
        r2 = np.sum(z * z, axis=-1)
        outer = z[..., :, None] * z[..., None, :] / r2[..., None, None]
        return 0.5 * density.eval(z)[..., None, None] * outer

    res = integrate_singular(integrand, n, cfg, extent=extent, split_radius=cfg.near_split_factor)
    m = np.asarray(res.value, dtype=float).reshape(n, n)
    m = 0.5 * (m + m.T)
    lam = np.linalg.eigvalsh(m)
    if np.min(lam) <= 1e-12 * np.trace(m):
        raise CertificationError(f"momentum matrix is not positive definite: eigenvalues {lam}")
    return MomentumMatrix(dim=n, m=m, a=sqrt_spd(m))


def default_rotations(dim: int) -> list[np.ndarray]:
    """Fixed rotation samples: 16 angles in 2D, 24 Halton quaternions in 3D."""
    if dim == 1:
        return [np.eye(1)]
    if dim == 2:
        th = 2.0 * np.pi * np.arange(16) / 16
        return [np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]) for t in th]
    if dim == 3:
        u = qmc.Halton(d=3, scramble=False).random(25)[1:]
        # Shoemake's map from the unit cube to uniformly distributed unit quaternions
        q = np.stack(
            [
                np.sqrt(1 - u[:, 0]) * np.sin(2 * np.pi * u[:, 1]),
                np.sqrt(1 - u[:, 0]) * np.cos(2 * np.pi * u[:, 1]),
                np.sqrt(u[:, 0]) * np.sin(2 * np.pi * u[:, 2]),
                np.sqrt(u[:, 0]) * np.cos(2 * np.pi * u[:, 2]),
            ],
            axis=-1,
        )
        return list(Rotation.from_quat(q).as_matrix())
    raise ParameterError(f"dimension {dim} not supported")


def _slice_breakpoints(zn, half_len):
    # panels graded toward z' = 0 on the scale |z_n| where the kernel peaks
    h = abs(zn)
    pts = [0.0]
    k = -3
    while h * 2.0**k < half_len:
        pts.append(h * 2.0**k)
        k += 1
    pts.append(half_len)
    pos = np.array(pts)
    return np.concatenate([-pos[::-1], pos[1:]])


def _slice_moment(density, aq, zn, half_len, nodes):
    n = density.dim
    bps = _slice_breakpoints(zn, half_len)
    t, w = gauss_legendre(nodes)
    a, b = bps[:-1, None], bps[1:, None]
    x1 = (a + (b - a) * t).ravel()
    w1 = ((b - a) * w).ravel()
    grids = np.meshgrid(*([x1] * (n - 1)), indexing="ij")
    zp = np.stack([g.ravel() for g in grids], axis=-1)
    wp = np.prod(np.meshgrid(*([w1] * (n - 1)), indexing="ij"), axis=0).ravel()
    z = np.concatenate([zp, np.full((len(zp), 1), zn)], axis=-1)
    x = z @ aq.T
    j = density.eval(x) / np.sum(x * x, axis=-1)
    return np.sum((wp * j)[:, None] * zp, axis=0)


def moment_cancellation_check(
    density: DensitySpec,
    a,
    rotation_samples=None,
    zn_samples=DEFAULT_ZN_SAMPLES,
    config: QuadratureConfig = QuadratureConfig(),
) -> float:
    """Largest component of ``int J(AQ(z', z_n)) z' dz'`` over the sampled ``(Q, z_n)``.

    The condition is only certified on the sampled rotations of SO(n);
    ``z_n = 0`` is rejected because the slice then passes through the
    singularity.
    """
    n = density.dim
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape != (n, n):
        raise ParameterError(f"a must be {n}x{n}")
    lam = np.linalg.eigvalsh(0.5 * (a + a.T))
    if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))) or np.min(lam) <= 0.0:
        raise ParameterError("a must be symmetric positive definite")
    zs = [float(z) for z in zn_samples]
    if any(z == 0.0 for z in zs):
        raise ParameterError("z_n = 0 is not allowed in zn_samples")
    if rotation_samples is None:
        rotation_samples = default_rotations(n)
    for q in rotation_samples:
        q = np.asarray(q, dtype=float)
        if np.max(np.abs(q @ q.T - np.eye(n))) > 1e-10 or abs(np.linalg.det(q) - 1.0) > 1e-10:
            raise ParameterError("rotation samples must be orthonormal with determinant 1")
    if n == 1:
        return 0.0
    if density.compact:
        r_max = density.support_radius
    elif isinstance(config.far_truncation, str):
        raise ParameterError("non-compact density needs a numeric far_truncation")
    else:
        r_max = float(config.far_truncation)
    # |AQz| <= r_max forces |z| <= r_max / lambda_min(A)
    z_max = r_max / float(np.min(lam))
    worst = 0.0
    for q in rotation_samples:
        aq = a @ np.asarray(q, dtype=float)
        for zn in zs:
            if abs(zn) >= z_max:
                continue
            half = float(np.sqrt(z_max**2 - zn**2))
            fine = _slice_moment(density, aq, zn, half, config.radial_nodes)
            coarse = _slice_moment(density, aq, zn, half, max(2, config.radial_nodes // 2))
            if not converged(fine, np.abs(fine - coarse), config):
                fine = _slice_moment(density, aq, zn, half, 4 * config.radial_nodes)
            worst = max(worst, float(np.max(np.abs(fine))))
    return worst
