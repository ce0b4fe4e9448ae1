import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonloclab.domains import Ball, FullSpace, GraphHalfSpace, Interval, rotation_2d
from nonloclab.errors import ContractError, ParameterError, UnsupportedError
from nonloclab.moments import MomentumMatrix
from nonloclab.testfunctions import (
    derivative_consistency,
    global_extension,
    linear_combination,
    make_compatible_function,
    make_test_function,
    neumann_compat_check,
    sobolev_norm,
)

I1 = MomentumMatrix.scalar(1.0, 1)
I2 = MomentumMatrix.scalar(1.0, 2)


def test_quadratic_recipe_values():
    h = np.array([[2.0, 1.0], [1.0, 4.0]])
    u = make_test_function("quadratic", 2, hessian=h, gradient=[1.0, -1.0], offset=3.0)
    x = np.array([0.5, -1.0])
    assert u.value(x) == pytest.approx(0.5 * x @ h @ x + 1.5 + 3.0)
    assert np.allclose(u.gradient(x), h @ x + [1.0, -1.0])
    assert np.allclose(u.hessian(x), h)
    assert np.allclose(u.third(x), 0.0)


def test_bump_support():
    u = make_test_function("bump", 2, center=[1.0, 0.0], radius=0.5)
    assert u.compact and u.support_radius == 0.5
    assert u.value(np.array([1.6, 0.0])) == 0.0
    assert u.value(np.array([1.0, 0.0])) == pytest.approx(1.0)


def test_unknown_recipe():
    with pytest.raises(ParameterError):
        make_test_function("sombrero", 1)
    with pytest.raises(ParameterError):
        make_compatible_function(Interval(0, 1), I1, "sombrero")


@pytest.mark.parametrize("builder", [
    lambda: (make_test_function("bump", 2, center=[0.1, 0.2], radius=1.2), 2),
    lambda: (make_compatible_function(Interval(0, 1), I1, "cos_k", k=2), 1),
    lambda: (make_compatible_function(GraphHalfSpace(2, amplitude=0.1), I2, "halfspace_bump"), 2),
    lambda: (make_compatible_function(Ball(2, transform=np.diag([1.5, 0.8])), np.diag([2.0, 0.5]), "radial"), 2),
])
def test_derivative_consistency(builder, rng):
    u, n = builder()
    pts = rng.uniform(-0.9, 0.9, size=(30, n)) + (0.5 if n == 1 else 0.0)
    errs = derivative_consistency(u, pts)
    assert max(errs.values()) <= 1e-5, errs


def test_cos_recipe_compatible():
    u = make_compatible_function(Interval(0, 1), I1, "cos_k")
    assert neumann_compat_check(u, Interval(0, 1), I1) <= 1e-12
    assert u.value(np.array([0.25])) == pytest.approx(np.cos(np.pi / 4))


def test_radial_recipe_compatible_for_any_m():
    dom = Ball(2, center=[0.2, 0.0], radius=1.0, transform=np.array([[1.2, 0.3], [0.3, 0.9]]))
    m = np.array([[2.0, 0.4], [0.4, 0.7]])
    u = make_compatible_function(dom, m, "radial")
    assert neumann_compat_check(u, dom, m) <= 1e-12


@pytest.mark.parametrize("angle,amp", [(0.0, 0.0), (0.0, 0.1), (0.7, 0.1)])
def test_halfspace_recipe_compatible(angle, amp):
    dom = GraphHalfSpace(2, amplitude=amp, rotation=rotation_2d(angle))
    u = make_compatible_function(dom, I2, "halfspace_bump")
    assert neumann_compat_check(u, dom, I2) <= 1e-10


def test_halfspace_recipe_needs_isotropic_m():
    with pytest.raises(UnsupportedError):
        make_compatible_function(GraphHalfSpace(2), np.diag([2.0, 0.5]), "halfspace_bump")


def test_recipe_domain_mismatch():
    with pytest.raises(UnsupportedError):
        make_compatible_function(Ball(2), I2, "cos_k")


def test_bump_violates_neumann():
    u = make_test_function("bump", 1, center=[0.0], radius=2.0)
    assert neumann_compat_check(u, Interval(0, 1), I1) > 1e-3


def test_compat_check_needs_boundary():
    u = make_test_function("bump", 1)
    with pytest.raises(ContractError, match="no boundary"):
        neumann_compat_check(u, FullSpace(1), I1)


def test_global_extension_tags_domain():
    u = make_compatible_function(Interval(0, 1), I1, "cos_k")
    assert global_extension(u, Interval(0, 1)).extension_of == "interval"


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1.5, 1.5))
def test_linear_combination_is_pointwise(a, b, x):
    u = make_test_function("bump", 1, radius=1.0)
    v = make_test_function("quadratic", 1)
    w = linear_combination(a, u, b, v)
    pt = np.array([x])
    assert w.value(pt) == pytest.approx(a * u.value(pt) + b * v.value(pt), abs=1e-12)


def test_sobolev_norm_of_cos():
    u = make_compatible_function(Interval(0, 1), I1, "cos_k")
    pts, w = Interval(0, 1).volume_rule(2)
    # sum_k int |(pi)^k cos|^2 = 1/2 (1 + pi^2 + pi^4 + pi^6)
    exact = np.sqrt(0.5 * sum(np.pi ** (2 * k) for k in range(4)))
    assert sobolev_norm(u, pts, w, 3, 2.0) == pytest.approx(exact, rel=1e-8)
