import io
import subprocess
import sys

import numpy as np
import pytest

from e2i2.cli import main
from e2i2.correlation import CorrelationCurve
from e2i2.scenario import SCENARIO_DIR


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def cfg(name):
    return str(SCENARIO_DIR / f"{name}.scenario")


def test_validate_ok():
    code, out, err = run("validate", "--config", cfg("sirius"))
    assert code == 0 and out.startswith("ok: sirius") and not err


def test_validate_reports_field_and_line(tmp_path):
    bad = tmp_path / "bad.scenario"
    bad.write_text(open(cfg("sirius")).read().replace("292 nm", "292 nmx"))
    code, out, err = run("validate", "--config", str(bad))
    assert code == 1
    assert "sources[0].wavelength" in err and "line" in err


def test_missing_config_file(tmp_path):
    code, _, err = run("validate", "--config", str(tmp_path / "nope.scenario"))
    assert code == 1 and "error" in err


def test_analytic_sirius(tmp_path):
    code, out, _ = run("analytic", "--config", cfg("sirius"), "--out", str(tmp_path))
    assert code == 0
    c = CorrelationCurve.from_csv(tmp_path / "sirius_single.csv")
    assert c.value[0] == pytest.approx(2.0)
    assert c.value[-1] == pytest.approx(1.0, abs=5e-3)
    raw = (tmp_path / "sirius_single.csv").read_bytes()
    assert raw.startswith(b"separation_m,value,variant\n") and b"\r" not in raw


def test_analytic_two_star_decomposition(tmp_path):
    code, _, _ = run("analytic", "--config", cfg("two_star"), "--out", str(tmp_path))
    assert code == 0
    curves = {v: CorrelationCurve.from_csv(tmp_path / f"two_star_{v}.csv") for v in ("no-e2i2", "e2i2", "delta")}
    np.testing.assert_allclose(curves["e2i2"].value - curves["no-e2i2"].value, curves["delta"].value,
                               rtol=0, atol=1e-12)


def test_analytic_variant_flag(tmp_path):
    code, _, _ = run("analytic", "--config", cfg("two_star"), "--out", str(tmp_path), "--variant", "delta")
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["two_star_delta.csv"]
    code, _, err = run("analytic", "--config", cfg("two_star"), "--variant", "single")
    assert code == 1 and "one-source" in err


def test_trials_zero_is_usage_error(capsys):
    code, _, _ = run("montecarlo", "--config", cfg("two_star"), "--trials", "0")
    assert code == 2
    assert "--trials" in capsys.readouterr().err


def test_montecarlo_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, out, _ = run("montecarlo", "--config", cfg("two_star"), "--trials", "1e3", "--seed", "42",
                           "--out", str(d))
        assert code == 0
        assert "seed 42" in out and "acceptance" in out
    names = sorted(p.name for p in a.iterdir())
    assert "two_star_e2i2_mc.csv" in names and "two_star_e2i2_mc_tally.csv" in names
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    header = (a / "two_star_e2i2_mc.csv").read_text().splitlines()[0]
    assert header == "separation_m,value,variant,error"


def test_estimate_sirius(tmp_path):
    run("analytic", "--config", cfg("sirius"), "--out", str(tmp_path))
    code, out, _ = run("estimate", "--config", cfg("sirius"), "--out", str(tmp_path),
                       str(tmp_path / "sirius_single.csv"))
    assert code == 0
    assert "angular_diameter: 4.9" in out
    assert "first_zero_baseline: 7.25" in out
    assert (tmp_path / "sirius_estimate.csv").exists()


def test_estimate_two_star(tmp_path):
    run("analytic", "--config", cfg("two_star"), "--out", str(tmp_path))
    code, out, _ = run("estimate", "--config", cfg("two_star"), "--out", str(tmp_path), str(tmp_path / "two_star_delta.csv"))
    assert code == 0
    sep = float(next(l for l in out.splitlines() if l.startswith("separation:")).split()[1])
    assert sep == pytest.approx(1.6e10, rel=1e-2)


def test_estimate_missing_variant(tmp_path):
    run("analytic", "--config", cfg("two_star"), "--out", str(tmp_path))
    code, _, err = run("estimate", "--config", cfg("two_star"), "--out", str(tmp_path), str(tmp_path / "two_star_e2i2.csv"))
    assert code == 1 and "'delta'" in err


def test_estimate_single_source_delta_has_no_oscillation(tmp_path):
    run("analytic", "--config", cfg("sirius"), "--out", str(tmp_path), "--variant", "delta")
    code, _, err = run("estimate", "--config", cfg("two_star"), "--out", str(tmp_path), str(tmp_path / "sirius_delta.csv"))
    assert code == 1 and "no oscillation detected" in err


def test_triangle_pipeline(tmp_path):
    code, _, _ = run("analytic", "--config", cfg("triangle3"), "--out", str(tmp_path))
    assert code == 0
    code, out, _ = run("estimate", "--config", cfg("triangle3"), "--out", str(tmp_path), str(tmp_path / "triangle3_delta_map.csv"))
    assert code == 0
    assert out.count("center_") == 12


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "e2i2", "validate", "--config", cfg("two_star")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("ok: two_star")
