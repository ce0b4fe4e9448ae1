import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from nonloclab.errors import ParameterError
from nonloclab.kernel import (
    make_anisotropic_density,
    make_bump_density,
    make_fractional_density,
    make_shifted_pair_density,
)
from nonloclab.quadrature import QuadratureConfig
from nonloclab.moments import default_rotations, moment_cancellation_check, momentum_matrix, sqrt_spd


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_unit_mass_normalisation_gives_identity(dim):
    m = momentum_matrix(make_bump_density(dim))
    assert np.allclose(m.m, np.eye(dim), atol=1e-10)


def test_fractional_momentum_oracle():
    # M = 1/2 int |z|^{-2s} chi(z) dz in 1D; compare with scipy
    from scipy import integrate

    d = make_fractional_density(0.25, dim=1)
    ref, _ = integrate.quad(lambda t: float(d.eval(np.array([t]))), 0, 2, points=[1.0], limit=200)
    assert momentum_matrix(d).m[0, 0] == pytest.approx(ref, rel=1e-9)


def test_anisotropic_momentum_is_b_inverse_squared():
    B = np.diag([2.0, 0.5])
    m = momentum_matrix(make_anisotropic_density(make_bump_density(2), B))
    assert np.allclose(m.m, np.diag([0.25, 4.0]), atol=1e-8)
    assert np.allclose(m.a, np.diag([0.5, 2.0]), atol=1e-8)


def test_rotated_anisotropic():
    c, s = np.cos(0.4), np.sin(0.4)
    Q = np.array([[c, -s], [s, c]])
    B = Q @ np.diag([1.5, 1 / 1.5]) @ Q.T
    m = momentum_matrix(make_anisotropic_density(make_bump_density(2), B))
    assert np.allclose(m.m, np.linalg.inv(B @ B), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=9, max_size=9))
def test_sqrt_spd_against_scipy(vals):
    a = np.array(vals).reshape(3, 3)
    m = a @ a.T + 0.5 * np.eye(3)
    r = sqrt_spd(m)
    assert np.allclose(r, r.T)
    assert np.all(np.linalg.eigvalsh(r) > 0)
    assert np.allclose(r, linalg.sqrtm(m).real, atol=1e-8 * max(1.0, np.max(np.abs(m))))


def test_sqrt_spd_rejects_indefinite():
    with pytest.raises(ParameterError):
        sqrt_spd(np.diag([1.0, -1.0]))
    with pytest.raises(ParameterError):
        sqrt_spd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_rotations_are_special_orthogonal():
    for dim in (2, 3):
        for q in default_rotations(dim):
            assert np.allclose(q @ q.T, np.eye(dim), atol=1e-12)
            assert np.linalg.det(q) == pytest.approx(1.0)


def test_cancellation_radial_and_anisotropic():
    bump = make_bump_density(2)
    assert moment_cancellation_check(bump, np.eye(2)) <= 1e-8
    B = np.diag([2.0, 0.5])
    an = make_anisotropic_density(bump, B)
    assert moment_cancellation_check(an, np.linalg.inv(B)) <= 1e-6


def test_cancellation_broken_kernel():
    d = make_shifted_pair_density(make_bump_density(2), [1.5, 1.5])
    cfg = QuadratureConfig(rel_tol=1e-6)
    m = momentum_matrix(d, cfg)
    assert moment_cancellation_check(d, m.a, config=cfg) > 1e-3


def test_cancellation_rejects_zero_slice():
    with pytest.raises(ParameterError):
        moment_cancellation_check(make_bump_density(2), np.eye(2), zn_samples=[0.0])
