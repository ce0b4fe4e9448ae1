import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from nonloclab.cli import main
from nonloclab.config import RunConfig, build_all, load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _cfg(name):
    return str(CONFIGS / f"{name}.json")


def test_every_shipped_config_validates_or_is_the_bad_one():
    for p in sorted(CONFIGS.glob("*.json")):
        if p.stem == "kernel_bad_alpha":
            with pytest.raises(ValidationError):
                load_config(p)
        else:
            load_config(p)


def test_schema_rejects_unknown_keys_and_bad_ladders():
    base = {"density": {"kind": "bump", "dim": 1}}
    RunConfig.model_validate(base)
    with pytest.raises(ValidationError):
        RunConfig.model_validate({**base, "colour": "blue"})
    with pytest.raises(ValidationError):
        RunConfig.model_validate({**base, "epsilons": [0.1, 0.2]})
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"density": {"kind": "fractional", "s": 1.2}})


def test_build_all_is_cached():
    text = load_config(_cfg("interval_p2")).canonical_json()
    assert build_all(text) is build_all(text)


@pytest.mark.parametrize("name,code", [
    ("kernel_bump_1d", 0), ("kernel_fractional_075", 0), ("kernel_bad_alpha", 2), ("kernel_shifted_pair", 1),
])
def test_kernel_check_exit_codes(name, code, tmp_path):
    assert main(["kernel-check", "--config", _cfg(name), "--out", str(tmp_path)]) == code
    if code != 2:
        doc = json.loads((tmp_path / "certification.json").read_text())
        assert doc["passed"] == (code == 0)


def test_apply_prints_both_operators(tmp_path, capsys):
    assert main(["apply", "--config", _cfg("interval_p2"), "--out", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"x", "nonlocal", "local", "route", "err_est", "epsilon"}


def test_apply_outside_domain(tmp_path, capsys):
    assert main(["apply", "--config", _cfg("interval_p2"), "--x", "1.5", "--out", str(tmp_path)]) == 1
    assert "point not interior" in capsys.readouterr().err


def test_apply_pv_route_near_boundary_refused(tmp_path):
    assert main(["apply", "--config", _cfg("interval_p2"), "--route", "pv_limit", "--out", str(tmp_path)]) == 1


def test_missing_config(tmp_path):
    assert main(["apply", "--config", str(tmp_path / "none.json")]) == 2


def test_study_strict_refuses_before_sweeping(tmp_path, capsys):
    code = main(["study", "--strict", "--config", _cfg("interval_neumann_violation"), "--out", str(tmp_path)])
    assert code == 1
    assert "natural boundary condition" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


def test_study_dry_run(tmp_path, capsys):
    assert main(["study", "--dry-run", "--config", _cfg("halfspace_curved"), "--out", str(tmp_path)]) == 0
    plan = json.loads(capsys.readouterr().out)["plan"]
    assert plan["evaluation_points"] > 0 and plan["grid_resolution"] == 96


def test_study_writes_outputs(tmp_path):
    assert main(["study", "--config", _cfg("interval_p2"), "--workers", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").exists() and (tmp_path / "errors.csv").exists()


def test_profile(tmp_path):
    assert main(["profile", "--config", _cfg("interval_p2"), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    assert lines[0] == "distance,abs_error" and len(lines) > 2


def test_bad_workers(tmp_path):
    assert main(["study", "--config", _cfg("interval_p2"), "--workers", "0"]) == 2
