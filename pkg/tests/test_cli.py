"""Scenario configs, report files, exit codes."""
import json

import pytest

from claimflow import SchemaError
from claimflow.cli import parse_config, run_scenario
from claimflow.selftest import run_selftest


def _scenario(**overrides):
    base = {
        "schema_version": 1,
        "seed": 42,
        "intensity": {"kind": "constant", "mu": 1.0},
        "delay": {"alpha0": 0.2, "density": {"kind": "exponential", "rate": 2.0}},
        "first_mark": {"mean": 1.0, "kind": "exponential"},
        "development": {"rate": 1.0, "mark_mean": 0.5, "mark_kind": "exponential"},
        "market": {"kind": "deterministic", "level": 1.0},
        "portfolio": {"n": 3},
        "valuation": {"T": 1.0},
        "mc": {"n_paths": 2000},
    }
    base.update(overrides)
    return base


def _write(tmp_path, config, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config, indent=2))
    return path


# ---------------------------------------------------------------------------
# Schema validation
# ---------------------------------------------------------------------------

def test_parse_valid_config():
    cfg = parse_config(json.dumps(_scenario()))
    assert cfg.n_policies == 3
    assert cfg.T == 1.0
    assert cfg.t == 0.0
    assert cfg.n_paths == 2000
    assert len(cfg.sha256) == 64


def test_alpha0_out_of_range_names_field():
    bad = _scenario(delay={"alpha0": 1.2, "density": {"kind": "exponential", "rate": 2.0}})
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(bad))
    assert err.value.field == "delay.alpha0"


def test_unknown_fields_rejected():
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(_scenario(bogus=1)))
    assert "bogus" in err.value.field
    nested = _scenario(intensity={"kind": "constant", "mu": 1.0, "nu": 2.0})
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(nested))
    assert err.value.field == "intensity.nu"


def test_missing_required_field():
    config = _scenario()
    del config["valuation"]
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(config))
    assert err.value.field == "<config>.valuation"


def test_schema_version_checked():
    with pytest.raises(SchemaError):
        parse_config(json.dumps(_scenario(schema_version=2)))


def test_reported_count_bounds():
    bad = _scenario(portfolio={"n": 3, "reported_count": 4}, valuation={"t": 0.5, "T": 1.0})
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(bad))
    assert err.value.field == "portfolio.reported_count"


def test_reported_count_requires_positive_time():
    bad = _scenario(portfolio={"n": 3, "reported_count": 1})
    with pytest.raises(SchemaError) as err:
        parse_config(json.dumps(bad))
    assert err.value.field == "portfolio.reported_count"


def test_invalid_json_reported():
    with pytest.raises(SchemaError):
        parse_config("{not json")


# ---------------------------------------------------------------------------
# Runs and exit codes
# ---------------------------------------------------------------------------

def test_run_analytic_only(tmp_path):
    path = _write(tmp_path, _scenario())
    assert run_scenario(path, tmp_path / "out", analytic_only=True) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["analytic"]["total"] > 0.0
    assert report["mc"] is None
    assert report["comparison"] is None


def test_run_with_validation(tmp_path):
    path = _write(tmp_path, _scenario(mc={"n_paths": 20000}))
    assert run_scenario(path, tmp_path / "out", validate=True) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["comparison"]["passed"] is True
    assert report["mc"]["n_effective"] == 20000


def test_run_bad_config_exits_one(tmp_path, capsys):
    bad = _scenario(delay={"alpha0": 1.2, "density": {"kind": "exponential", "rate": 2.0}})
    path = _write(tmp_path, bad)
    assert run_scenario(path, tmp_path / "out") == 1
    assert "delay.alpha0" in capsys.readouterr().err


def test_run_unsupported_regime_exits_three(tmp_path, capsys):
    config = _scenario(
        intensity={"kind": "log_ou", "mean_rev": 2.0, "long_run_log_level": 0.0,
                   "vol": 0.5, "init": 1.0},
        market={"kind": "martingale", "init": 1.0, "vol": 0.2, "corr_with_intensity": 0.5},
    )
    path = _write(tmp_path, config)
    assert run_scenario(path, tmp_path / "out") == 3
    assert "--mc-only" in capsys.readouterr().err


def test_run_mc_only_handles_correlated_regime(tmp_path):
    config = _scenario(
        intensity={"kind": "log_ou", "mean_rev": 2.0, "long_run_log_level": 0.0,
                   "vol": 0.5, "init": 1.0},
        market={"kind": "martingale", "init": 1.0, "vol": 0.2, "corr_with_intensity": 0.5},
        mc={"n_paths": 2000},
    )
    path = _write(tmp_path, config)
    assert run_scenario(path, tmp_path / "out", mc_only=True) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["analytic"] is None
    assert report["mc"]["mean"] > 0.0


def test_validated_mismatch_exits_two(tmp_path):
    # A 5% quadrature bias pushes the analytic value many standard errors
    # away from the oracle; with --validate that must surface as exit 2,
    # with the failure recorded in the report.
    path = _write(tmp_path, _scenario(mc={"n_paths": 20000}))
    code = run_scenario(path, tmp_path / "out", validate=True,
                        quadrature_perturbation=0.05)
    assert code == 2
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["comparison"]["passed"] is False


def test_run_missing_file_exits_one(tmp_path, capsys):
    assert run_scenario(tmp_path / "nope.json", tmp_path) == 1
    assert "cannot read" in capsys.readouterr().err


def test_conditional_scenario_round_trip(tmp_path):
    config = _scenario(
        portfolio={"n": 2, "reported_count": 1},
        valuation={"t": 0.5, "T": 1.0},
        mc={"n_paths": 30000},
    )
    path = _write(tmp_path, config)
    assert run_scenario(path, tmp_path / "out", validate=True) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["comparison"]["passed"] is True


def test_curve_csv_layout(tmp_path):
    path = _write(tmp_path, _scenario())
    assert run_scenario(path, tmp_path / "out", analytic_only=True) == 0
    raw = (tmp_path / "out" / "curve.csv").read_bytes()
    lines = raw.split(b"\r\n")
    assert lines[0] == b"time,reporting_cdf,reporting_density,ibnr_prob,survival"
    assert len(lines) == 1 + 366 + 1  # header + one row per grid node + final CRLF
    first = lines[1].split(b",")
    assert first[0] == b"0" and first[4] == b"1"


def test_repeated_runs_are_byte_identical(tmp_path):
    path = _write(tmp_path, _scenario(market={"kind": "martingale", "init": 1.0, "vol": 0.2},
                                      mc={"n_paths": 5000}))
    assert run_scenario(path, tmp_path / "a", validate=True, threads=1) == 0
    assert run_scenario(path, tmp_path / "b", validate=True, threads=2) == 0
    for name in ("report.json", "curve.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_exclusive_flags(tmp_path, capsys):
    path = _write(tmp_path, _scenario())
    assert run_scenario(path, tmp_path, mc_only=True, analytic_only=True) == 1
    assert "mutually exclusive" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Self-test wiring
# ---------------------------------------------------------------------------

def test_quick_selftest_passes(capsys):
    assert run_selftest(quick=True) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out


def test_broken_quadrature_is_detected(capsys):
    assert run_selftest(quick=True, break_quadrature=True) == 1
    assert "[FAIL]" in capsys.readouterr().out
