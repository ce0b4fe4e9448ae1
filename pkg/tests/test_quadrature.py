import math

import numpy as np
import pytest
from scipy import integrate

from nonloclab.domains import Ball, Interval
from nonloclab.errors import ParameterError, QuadratureError
from nonloclab.quadrature import (
    QuadratureConfig,
    gauss_legendre,
    integrate_over_region,
    integrate_rays,
    integrate_singular,
    log_rule,
    singular_rule,
    sphere_measure,
    sphere_rule,
)


def test_gauss_legendre_integrates_polynomials_exactly():
    t, w = gauss_legendre(6)
    for k in range(12):
        assert np.sum(w * t**k) == pytest.approx(1.0 / (k + 1), rel=1e-14)


@pytest.mark.parametrize("dim,k", [(1, 2), (2, 16), (3, 12)])
def test_sphere_rule_is_antipodal_and_sums_to_measure(dim, k):
    dirs, w = sphere_rule(dim, k)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.sum(w) == pytest.approx(sphere_measure(dim), rel=1e-12)
    # every node has its antipode with the same weight
    for d, wi in zip(dirs, w):
        j = np.argmin(np.linalg.norm(dirs + d, axis=1))
        assert np.linalg.norm(dirs[j] + d) < 1e-12 and w[j] == pytest.approx(wi)


def test_sphere_rule_second_moments():
    dirs, w = sphere_rule(3, 16)
    mom = np.einsum("k,ki,kj->ij", w, dirs, dirs)
    assert np.allclose(mom, sphere_measure(3) / 3 * np.eye(3), atol=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 1.9])
def test_singular_rule_matches_power_integrals(alpha):
    t, w = singular_rule(alpha, 16, 8, 4, 6)
    exact = 1.0 / (2.0 - alpha)
    assert np.sum(w * t ** (1.0 - alpha)) == pytest.approx(exact, rel=1e-8)


def test_log_rule_integrates_in_log_variable():
    tau, w = log_rule(16, 6, 4)
    assert np.sum(w) == pytest.approx(1.0, rel=1e-13)
    assert np.sum(w * tau**3) == pytest.approx(0.25, rel=1e-12)


def test_integrate_singular_against_scipy():
    # int_{|x|<1} |x|^{-1.5} cos(x) dx in 1D
    cfg = QuadratureConfig(rel_tol=1e-10).with_alpha(1.5)
    res = integrate_singular(lambda z: np.abs(z[..., 0]) ** -0.5 * np.cos(z[..., 0]), 1, cfg, radius=1.0)
    ref, _ = integrate.quad(lambda r: np.cos(r), 0.0, 1.0, weight="alg", wvar=(-0.5, 0.0))
    assert res.value == pytest.approx(2 * ref, rel=1e-9)
    assert res.error_estimate <= 1e-9 * abs(res.value)


def test_integrate_singular_2d_gaussian():
    cfg = QuadratureConfig(rel_tol=1e-11)
    res = integrate_singular(lambda z: np.exp(-np.sum(z * z, axis=-1)), 2, cfg, radius=6.0)
    assert res.value == pytest.approx(math.pi * (1 - math.exp(-36)), rel=1e-10)


def test_integrate_singular_vector_valued():
    res = integrate_singular(lambda z: z[..., :, None] * z[..., None, :], 2, QuadratureConfig(), radius=1.0)
    assert np.allclose(res.value, math.pi / 4 * np.eye(2), atol=1e-12)


def test_integrate_singular_failure_carries_estimate():
    cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=0.0, max_refinements=0, radial_nodes=2)
    with pytest.raises(QuadratureError) as info:
        integrate_singular(lambda z: np.sin(900 * z[..., 0] ** 2) + 2, 1, cfg, radius=1.0)
    assert info.value.error_estimate > 0 and info.value.value is not None


def test_config_validation():
    with pytest.raises(ParameterError):
        QuadratureConfig(rel_tol=2.0)
    with pytest.raises(ParameterError):
        QuadratureConfig(far_truncation="everything")
    with pytest.raises(ParameterError):
        QuadratureConfig(radial_nodes=0)


def _bump2(y, c=(0.2, 0.1), rad=0.7):
    t = np.sum((y - np.asarray(c)) ** 2, axis=-1) / rad**2
    return np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)


def test_region_and_complement_add_up_to_ball():
    disk = Ball(2, radius=0.5)
    center = np.array([0.3, 0.0])
    cfg = QuadratureConfig(rel_tol=1e-9)
    inner = integrate_over_region(_bump2, disk, center, 1.2, cfg)
    outer = integrate_over_region(_bump2, disk, center, 1.2, cfg, complement=True)
    full = integrate_singular(_bump2, 2, cfg, radius=1.2, center=center)
    assert inner.value + outer.value == pytest.approx(full.value, rel=1e-8)


def test_interval_region_integral_against_scipy():
    dom = Interval(0.0, 1.0)
    f = lambda y: np.cos(3 * y[..., 0])
    res = integrate_over_region(f, dom, [0.3], 0.5, QuadratureConfig())
    ref, _ = integrate.quad(lambda t: np.cos(3 * t), 0.0, 0.8)
    assert res.value == pytest.approx(ref, rel=1e-11)


def test_integrate_rays_floor_relaxes_tolerance():
    dom = Interval(0.0, 1.0)
    g = lambda dirs, r, y: np.cos(y[..., 0])
    res = integrate_rays(g, dom, [0.5], 0.2, QuadratureConfig(), floor=10.0)
    assert res.mass > 0 and res.value == pytest.approx(2 * math.sin(0.2) * math.cos(0.5), rel=1e-10)
