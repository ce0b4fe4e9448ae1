"""``nonloc-lab`` command-line interface.

Exit codes: 0 success, 1 failed check / contract violation, 2 schema or
config error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import RunConfig, build_all, build_density, build_quadrature, load_config
from .errors import (
    CertificationError,
    CompatibilityError,
    ContractError,
    NonlocLabError,
    ParameterError,
    QuadratureError,
    UnsupportedError,
)
from .harness import COMPAT_TOL, StudyError, boundary_layer_profile, convergence_study, study_plan
from .kernel import (
    KernelFamily,
    check_dirac_property,
    check_evenness,
    check_growth_bounds,
    check_integrability,
)
from .moments import momentum_matrix, moment_cancellation_check
from .operators import apply_local, apply_nonlocal_domain, apply_nonlocal_pv
from .testfunctions import neumann_compat_check

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("nonloclab")


class _SchemaError(Exception):
    pass


def _load(path) -> RunConfig:
    try:
        return load_config(path)
    except FileNotFoundError as exc:
        raise _SchemaError(f"config file not found: {path}") from exc
    except ValidationError as exc:
        raise _SchemaError(f"invalid config {path}:\n{exc}") from exc


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# kernel-check


def _dirac_record(density, section, quad):
    tails = check_dirac_property(density, section.delta, section.dirac_epsilons, quad)
    masses = check_dirac_property(density, 0.0, [1.0, 0.5, 0.1], quad)
    ref = masses[0]
    mass_dev = max(abs(m - ref) for m in masses) / max(abs(ref), 1e-300)
    ok = mass_dev <= 1e-8
    for a, b in zip(tails, tails[1:]):
        ok &= (b < a) if a > 0.0 else (b == 0.0)
    if density.compact:
        for e, t in zip(section.dirac_epsilons, tails):
            if e * density.support_radius <= section.delta:
                ok &= t == 0.0
    return {
        "check": "dirac_property", "pass": bool(ok), "worst_ratio": mass_dev,
        "detail": {"delta": section.delta, "epsilons": section.dirac_epsilons, "tail_masses": tails,
                   "mass_epsilons": [1.0, 0.5, 0.1], "masses": masses},
    }


def cmd_kernel_check(args) -> int:
    cfg = _load(args.config)
    section = cfg.kernel_check
    if args.dry_run:
        _emit({"subcommand": "kernel-check", "density": cfg.density.model_dump(),
               "checks": ["evenness", "integrability", "growth_bounds", "dirac_property",
                          "momentum_matrix", "moment_cancellation"]})
        return EXIT_OK
    density = build_density(cfg.density)
    quad = build_quadrature(cfg.quadrature)
    records = [
        check_evenness(density, section.evenness_samples, seed=args.seed).to_dict(),
        check_integrability(density, quad).to_dict(),
        check_growth_bounds(density, section.growth_samples).to_dict(),
        _dirac_record(density, section, quad),
    ]
    mm = None
    try:
        mm = momentum_matrix(density, quad)
        records.append({"check": "momentum_matrix", "pass": True,
                        "worst_ratio": float(np.min(np.linalg.eigvalsh(mm.m)) / np.trace(mm.m)),
                        "detail": mm.to_dict()})
    except CertificationError as exc:
        records.append({"check": "momentum_matrix", "pass": False, "worst_ratio": None,
                        "detail": {"reason": str(exc)}})
    if mm is not None:
        tol = section.moment_tolerance or (1e-8 if density.is_radial else 1e-6)
        worst = moment_cancellation_check(density, mm.a, zn_samples=section.zn_samples, config=quad)
        records.append({"check": "moment_cancellation", "pass": bool(worst <= tol), "worst_ratio": worst,
                        "detail": {"tolerance": tol, "rotations": "SO(n) samples only; O(n) not asserted"}})
    passed = all(r["pass"] for r in records)
    out = _out_dir(args) / "certification.json"
    doc = {"density": density.to_dict(), "passed": passed, "checks": records, "seed": args.seed}
    out.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    for r in records:
        log.info("%-20s %s", r["check"], "pass" if r["pass"] else "FAIL")
    _emit({"certification": str(out), "passed": passed})
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# apply


def cmd_apply(args) -> int:
    cfg = _load(args.config)
    if cfg.test_function is None:
        raise _SchemaError("apply needs a test_function section")
    section = cfg.apply
    x = args.x if args.x is not None else (section.x if section else None)
    eps = args.epsilon if args.epsilon is not None else (section.epsilon if section else None)
    route = args.route or (section.route if section else "complement_decomposition")
    if x is None or eps is None:
        raise _SchemaError("apply needs a point x and an epsilon (config 'apply' section or flags)")
    if args.dry_run:
        _emit({"subcommand": "apply", "x": x, "epsilon": eps, "route": route})
        return EXIT_OK
    _, density, domain, m, u, quad = build_all(cfg.canonical_json())
    fam = KernelFamily(density, eps)
    xp = domain.require_interior(np.asarray(x, dtype=float))
    if route == "pv_limit":
        reach = fam.support_radius if density.compact else eps * float(quad.far_truncation)
        if domain.has_boundary and float(domain.boundary_distance(xp)) < reach:
            raise UnsupportedError("pv_limit route is only available where the kernel does not reach the boundary")
        pv = apply_nonlocal_pv(u, fam, xp, config=quad)
        value, err = pv.limit, pv.limit_error
    else:
        res = apply_nonlocal_domain(u, fam, domain, xp, route, quad)
        value, err = res.value, res.error_estimate
    _emit({"x": xp.tolist(), "nonlocal": value, "local": apply_local(u, m, xp), "route": route,
           "err_est": err, "epsilon": eps})
    return EXIT_OK


# ---------------------------------------------------------------------------
# study


def _workers(args) -> int:
    return args.workers if args.workers is not None else (os.cpu_count() or 1)


def cmd_study(args) -> int:
    cfg = _load(args.config)
    try:
        cfg.require_study()
    except ValueError as exc:
        raise _SchemaError(str(exc)) from exc
    if args.dry_run:
        plan = study_plan(cfg)
        plan["workers"] = _workers(args)
        _emit({"subcommand": "study", "plan": plan})
        return EXIT_OK
    _, density, domain, m, u, quad = build_all(cfg.canonical_json())
    diagnostic = False
    if domain.has_boundary:
        violation = neumann_compat_check(u, domain, m, 1000)
        if violation > COMPAT_TOL:
            if args.strict:
                print(f"error: test function violates the natural boundary condition "
                      f"(max |M grad u . n| = {violation:.3e}); refusing to run", file=sys.stderr)
                return EXIT_FAIL
            log.warning("boundary condition violated (%.3e); running in diagnostic mode", violation)
            diagnostic = True
    workers = _workers(args)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            report = convergence_study(cfg, map_fn=lambda f, t: pool.map(f, t), diagnostic=diagnostic,
                                       log=log.info)
    else:
        report = convergence_study(cfg, diagnostic=diagnostic, log=log.info)
    rp, cp = report.write(_out_dir(args))
    summary = [{k: f.get(k) for k in ("p", "fitted_slope", "theoretical_slope", "fit_residual", "pass")}
               for f in report.fits]
    _emit({"report": str(rp), "errors_csv": str(cp), "passed": report.passed, "fits": summary,
           "diagnostic_mode": diagnostic})
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# profile


def cmd_profile(args) -> int:
    cfg = _load(args.config)
    if cfg.profile is None or cfg.test_function is None:
        raise _SchemaError("profile needs 'profile' and 'test_function' sections")
    sec = cfg.profile
    start, end = np.asarray(sec.start, dtype=float), np.asarray(sec.end, dtype=float)
    if args.dry_run:
        _emit({"subcommand": "profile", "epsilon": sec.epsilon, "start": sec.start, "end": sec.end,
               "count": sec.count})
        return EXIT_OK
    _, density, domain, m, u, quad = build_all(cfg.canonical_json())
    t = np.linspace(0.0, 1.0, sec.count)
    transect = start + t[:, None] * (end - start)
    for x in transect:
        domain.require_interior(x)
    prof = boundary_layer_profile(u, KernelFamily(density, sec.epsilon), domain, m, transect, quad, cfg.route)
    out = _out_dir(args)
    with open(out / "profile.csv", "w", newline="\n") as fh:
        fh.write("distance,abs_error\n")
        for d, e in prof:
            fh.write(f"{format(d, '.17g')},{format(e, '.17g')}\n")
    _emit({"profile_csv": str(out / "profile.csv"), "points": len(prof), "epsilon": sec.epsilon})
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonloc-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run file")
    common.add_argument("--out", default="nonloc-out", help="output directory (default: nonloc-out)")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    common.add_argument("--strict", action="store_true", help="refuse studies whose u violates the boundary condition")
    common.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("kernel-check", parents=[common], help="certify a density").set_defaults(func=cmd_kernel_check)
    ap = sub.add_parser("apply", parents=[common], help="evaluate the operators at one point")
    ap.add_argument("--x", type=float, nargs="+", default=None)
    ap.add_argument("--epsilon", type=float, default=None)
    ap.add_argument("--route", choices=["complement_decomposition", "regularized", "pv_limit"], default=None)
    ap.set_defaults(func=cmd_apply)
    sub.add_parser("study", parents=[common], help="run an epsilon sweep").set_defaults(func=cmd_study)
    sub.add_parser("profile", parents=[common], help="error along a transect").set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        return args.func(args)
    except _SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (QuadratureError, StudyError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ContractError, CompatibilityError, CertificationError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ParameterError, ValueError) as exc:
        print(f"error: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NonlocLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
