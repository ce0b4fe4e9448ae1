"""Acceptance criteria 1-11.

Each test prints one ``PASS``/``FAIL`` line; the lines are also collected and
repeated in the terminal summary.  Run ``python tests/test_acceptance.py`` to
get only the criterion lines.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest

from nonloclab.config import load_config
from nonloclab.domains import FullSpace, Interval
from nonloclab.harness import convergence_study
from nonloclab.kernel import (
    KernelFamily,
    check_dirac_property,
    make_anisotropic_density,
    make_bump_density,
    make_fractional_density,
    make_polynomial_density,
    make_shifted_pair_density,
    make_singular_bump_density,
)
from nonloclab.moments import moment_cancellation_check, momentum_matrix
from nonloclab.operators import (
    apply_local,
    apply_nonlocal_domain,
    apply_nonlocal_fullspace,
    apply_nonlocal_pv,
    energy_identity_check,
    shell_first_moment,
)
from nonloclab.quadrature import QuadratureConfig
from nonloclab.testfunctions import (
    derivative_consistency,
    linear_combination,
    make_compatible_function,
    make_test_function,
)
from nonloclab.domains import Ball, GraphHalfSpace

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LADDER = [0.4, 0.2, 0.1, 0.05]
RESULTS: dict[int, str] = {}


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def _study(name):
    cfg = load_config(CONFIGS / f"{name}.json")
    t0 = time.perf_counter()
    rep = convergence_study(cfg)
    return cfg, rep, time.perf_counter() - t0


def _slopes(rep):
    return {f["p"]: f["fitted_slope"] for f in rep.fits}


def _fmt(slopes):
    return ", ".join(f"p={p:g}: {'no fit' if s is None else f'{s:.3f}'}" for p, s in slopes.items())


def test_c01_fullspace_rate():
    cfg, rep, wall = _study("fullspace_1d")
    assert cfg.dim == 1 and cfg.density.kind == "bump" and cfg.density.alpha == 1.0
    assert cfg.test_function.recipe == "bump" and cfg.epsilons == LADDER and cfg.p_values == [1.0, 2.0]
    s = _slopes(rep)
    ok = all(v is not None and v >= 0.85 for v in s.values()) and wall <= 300
    report(1, ok, f"full-space slopes {_fmt(s)} (need >= 0.85), {wall:.1f}s serial (limit 300s)")


def test_c02_interval_rates():
    cfg, rep, wall = _study("interval_rates")
    assert cfg.domain.kind == "interval" and (cfg.domain.a, cfg.domain.b) == (0.0, 1.0)
    assert cfg.test_function.recipe == "cos_k" and cfg.epsilons == LADDER
    s = _slopes(rep)
    ok = all(s[p] is not None and s[p] >= 1.0 / p - 0.15 for p in (1.0, 2.0, 4.0))
    drop = s[1.0] - s[2.0] if None not in (s[1.0], s[2.0]) else float("nan")
    ok = ok and drop >= 0.2 and wall <= 600
    report(2, ok, f"interval slopes {_fmt(s)} (need >= 1/p - 0.15), p1-p2 drop {drop:.3f} (need >= 0.2), "
                  f"{wall:.1f}s serial (limit 600s)")


@pytest.mark.slow
def test_c03_halfspace_rates():
    parts, ok = [], True
    for name, amp in (("halfspace_flat", 0.0), ("halfspace_curved", 0.1)):
        cfg, rep, wall = _study(name)
        assert cfg.domain.kind == "half_space_graph" and cfg.domain.amplitude == amp and cfg.dim == 2
        assert cfg.p_values == [2.0] and cfg.epsilons == LADDER
        s = _slopes(rep)[2.0]
        # one CPU here: the serial wall time is held to the 8-worker budget
        ok &= s is not None and s >= 0.35 and wall <= 1200
        parts.append(f"{name} slope {s:.3f} in {wall:.0f}s serial" if s is not None else f"{name} no fit")
    report(3, ok, "; ".join(parts) + " (need slope >= 0.35, <= 1200s)")


def _shipped_kernels():
    yield "bump 1d", make_bump_density(1)
    yield "bump 2d", make_bump_density(2)
    yield "singular bump 1d", make_singular_bump_density(1, alpha=1.5)
    yield "polynomial 2d", make_polynomial_density(2)
    for s in (0.25, 0.75):
        yield f"fractional s={s} 1d", make_fractional_density(s, dim=1)
        yield f"fractional s={s} 2d", make_fractional_density(s, dim=2)
    yield "anisotropic 2d", make_anisotropic_density(make_bump_density(2), np.diag([2.0, 0.5]))


def test_c04_quadratic_exactness():
    rng = np.random.default_rng(4)
    worst, where = 0.0, ""
    for label, d in _shipped_kernels():
        n = d.dim
        m = momentum_matrix(d)
        h = rng.normal(size=(n, n))
        u = make_test_function("quadratic", n, hessian=h + h.T, gradient=rng.normal(size=n), offset=0.5)
        pts = rng.uniform(-1, 1, size=(10, n))
        for eps in (1.0, 0.1):
            fam = KernelFamily(d, eps)
            for x in pts:
                gap = abs(apply_nonlocal_fullspace(u, fam, x).value - apply_local(u, m, x))
                if gap > worst:
                    worst, where = gap, f"{label}, eps={eps}"
    report(4, worst <= 1e-6, f"max |L_eps u + M:D2u| = {worst:.2e} ({where}) over 8 kernels, "
                             "10 points, eps in {1, 0.1} (need <= 1e-6)")


def test_c05_momentum_identities():
    B = np.diag([2.0, 0.5])
    base = make_bump_density(2, mass=4.0)
    mm = momentum_matrix(make_anisotropic_density(base, B))
    dm = float(np.max(np.abs(mm.m - np.diag([0.25, 4.0]))))
    da = float(np.max(np.abs(mm.a - np.diag([0.5, 2.0]))))
    report(5, dm <= 1e-6 and da <= 1e-6, f"|M - B^-2| = {dm:.2e}, |A - B^-1| = {da:.2e} (need <= 1e-6)")


def test_c06_moment_cancellation():
    radial = [make_bump_density(2), make_fractional_density(0.75, dim=2), make_bump_density(3)]
    r_worst = max(moment_cancellation_check(d, momentum_matrix(d).a) for d in radial)
    B = np.diag([2.0, 0.5])
    an = make_anisotropic_density(make_bump_density(2), B)
    a_worst = moment_cancellation_check(an, momentum_matrix(an).a)
    cfg = QuadratureConfig(rel_tol=1e-6)
    broken = make_shifted_pair_density(make_bump_density(2), [1.5, 1.5])
    b_val = moment_cancellation_check(broken, momentum_matrix(broken, cfg).a, config=cfg)
    ok = r_worst <= 1e-8 and a_worst <= 1e-6 and b_val > 1e-3
    report(6, ok, f"radial {r_worst:.2e} (<= 1e-8), anisotropic {a_worst:.2e} (<= 1e-6), "
                  f"broken {b_val:.2e} (> 1e-3)")


def test_c07_fractional_singular_kernel():
    d = make_fractional_density(0.75, dim=1)
    assert d.alpha == pytest.approx(1.5)
    cfg = QuadratureConfig(rel_tol=1e-8)
    u = make_test_function("bump", 1, radius=1.2)
    dom = Interval(-1.0, 1.0)
    v = make_compatible_function(dom, momentum_matrix(d), "cos_k")
    worst_rel, pv_gap, finite, cauchy = 0.0, 0.0, True, True
    for eps in (0.4, 0.1):
        fam = KernelFamily(d, eps)
        for x in (-0.5, 0.0, 0.3, 0.9):
            r = apply_nonlocal_fullspace(u, fam, [x], cfg)
            finite &= math.isfinite(r.value)
            worst_rel = max(worst_rel, r.error_estimate / max(abs(r.value), 1e-300))
            pv = apply_nonlocal_pv(u, fam, [x], config=cfg)
            cauchy &= pv.cauchy
            pv_gap = max(pv_gap, abs(pv.limit - r.value) / max(abs(r.value), 1e-300))
        for x in (-0.95, 0.2, 0.97):
            for route in ("complement_decomposition", "regularized"):
                r = apply_nonlocal_domain(v, fam, dom, [x], route, cfg)
                finite &= math.isfinite(r.value)
                worst_rel = max(worst_rel, r.error_estimate / max(abs(r.value), 1e-300))
    ok = finite and worst_rel <= 1e-6 and pv_gap <= 1e-6 and cauchy
    report(7, ok, f"s=0.75: all finite={finite}, max rel err_est {worst_rel:.2e} (<= 1e-6), "
                  f"PV vs regularized {pv_gap:.2e} (<= 1e-6), Cauchy={cauchy}")


def test_c08_route_equivalence(bump1, m1):
    dom = Interval(0.0, 1.0)
    u = make_compatible_function(dom, m1, "cos_k")
    pts = (np.arange(20) + 0.5) / 20
    worst = 0.0
    for eps in (0.2, 0.05):
        fam = KernelFamily(bump1, eps)
        for x in pts:
            a = apply_nonlocal_domain(u, fam, dom, [x], "complement_decomposition").value
            b = apply_nonlocal_domain(u, fam, dom, [x], "regularized").value
            worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    report(8, worst <= 1e-8, f"max relative route gap {worst:.2e} at 20 points x eps {{0.2, 0.05}} (need <= 1e-8)")


def test_c09_energy_identity(bump1, m1):
    dom = Interval(0.0, 1.0)
    u = make_compatible_function(dom, m1, "cos_k")
    main = energy_identity_check(u, KernelFamily(bump1, 0.2), dom)
    rhs_ok = main.rhs >= 0.0
    for eps in (0.4, 0.1):
        rhs_ok &= energy_identity_check(u, KernelFamily(bump1, eps), dom).rhs >= 0.0
    ok = main.relative_gap <= 1e-4 and rhs_ok
    report(9, ok, f"eps=0.2 gap {main.relative_gap:.2e} (<= 1e-4), lhs {main.lhs:.6f}, rhs {main.rhs:.6f}, "
                  f"rhs >= 0 in all runs: {rhs_ok}")


def test_c10_dirac_family():
    dens = {"bump R=1": make_bump_density(1), "bump R=4": make_bump_density(1, radius=4.0),
            "bump 2d": make_bump_density(2), "fractional cutoff 5": make_fractional_density(0.5, 5.0, dim=1)}
    cfg = QuadratureConfig()
    mass_dev, ok, notes = 0.0, True, []
    for label, d in dens.items():
        masses = check_dirac_property(d, 0.0, [1.0, 0.5, 0.1], cfg)
        mass_dev = max(mass_dev, max(abs(m - masses[0]) for m in masses) / masses[0])
        eps = [0.4, 0.2, 0.1]
        tails = check_dirac_property(d, 0.5, eps, cfg)
        positive = [t for t in tails if t > 0.0]
        ok &= all(b < a for a, b in zip(positive, positive[1:]))
        ok &= all(t == 0.0 for e, t in zip(eps, tails) if e < 0.5 / d.support_radius)
        ok &= all(t > 0.0 for e, t in zip(eps, tails) if e * d.support_radius > 0.5)
        notes.append(f"{label} tails {['%.3g' % t for t in tails]}")
    ok &= mass_dev <= 1e-8
    report(10, ok, f"mass deviation {mass_dev:.1e} (<= 1e-8); " + "; ".join(notes))


def test_c11_derivatives_linearity_evenness(bump1, m1):
    rng = np.random.default_rng(11)
    i2 = np.eye(2)
    funcs = [
        (make_test_function("bump", 2, center=[0.2, -0.1], radius=1.1), rng.uniform(-1, 1, (40, 2))),
        (make_test_function("quadratic", 2, hessian=[[1, 2], [2, -1]]), rng.uniform(-1, 1, (40, 2))),
        (make_compatible_function(Interval(0, 1), m1, "cos_k", k=3), rng.uniform(-0.6, 1.6, (40, 1))),
        (make_compatible_function(Ball(2, transform=np.diag([1.3, 0.7])), np.diag([2.0, 0.5]), "radial"),
         rng.uniform(-1.5, 1.5, (40, 2))),
        (make_compatible_function(GraphHalfSpace(2, amplitude=0.1), i2, "halfspace_bump"),
         rng.uniform(-1.2, 1.2, (40, 2))),
    ]
    fd = max(max(derivative_consistency(u, p).values()) for u, p in funcs)

    dom = Interval(0.0, 1.0)
    u = make_test_function("bump", 1, center=[0.3], radius=0.9)
    v = make_compatible_function(dom, m1, "cos_k")
    lin = 0.0
    for eps in (0.2, 0.05):
        fam = KernelFamily(bump1, eps)
        for a, b in ((1.7, -0.6), (-3.0, 0.25)):
            w = linear_combination(a, u, b, v)
            for x in rng.uniform(0.01, 0.99, 6):
                for route in ("complement_decomposition", "regularized"):
                    lu = apply_nonlocal_domain(u, fam, dom, [x], route).value
                    lv = apply_nonlocal_domain(v, fam, dom, [x], route).value
                    lw = apply_nonlocal_domain(w, fam, dom, [x], route).value
                    lin = max(lin, abs(lw - (a * lu + b * lv)) / max(abs(lw), abs(a * lu), abs(b * lv)))

    shells = 0.0
    for d in (make_bump_density(1), make_bump_density(2), make_bump_density(3),
              make_fractional_density(0.75, dim=2),
              make_anisotropic_density(make_bump_density(2), np.diag([2.0, 0.5]))):
        fam = KernelFamily(d, 0.5)
        for r_min in (1e-3, 0.05, 0.2):
            vec = rng.normal(size=d.dim)
            shells = max(shells, abs(shell_first_moment(fam, r_min, vec).value))
    ok = fd <= 1e-5 and lin <= 1e-9 and shells <= 1e-10
    report(11, ok, f"finite differences {fd:.2e} (<= 1e-5), linearity {lin:.2e} (<= 1e-9), "
                   f"evenness shells {shells:.2e} (<= 1e-10)")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
