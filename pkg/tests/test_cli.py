import csv
import json

import numpy as np
import pytest

from rbnoise.cli import build_parser, main
from rbnoise.const import (
    EXIT_BUDGET_EXCEEDED,
    EXIT_CHECK_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    MANIFEST_FILE,
    REPORT_FILE,
)

TINY = """
name = "tiny"
seed = 7

[defaults]
sequences = 4
length = 6
realizations = 5

[[runs]]
label = "correlated"
noise = [{ channel = "detuning", correlation = "full", rms2 = 2e-3 }]

[[runs]]
label = "uncorrelated"
noise = [{ channel = "detuning", correlation = "block", block_gates = 1, rms2 = 2e-3 }]

[analysis]
reorderings = 20
"""

FAILING_CHECK = """
[[analysis.checks]]
kind = "slope"
run = "uncorrelated"
low = 5.0
"""

ACF = """
name = "acf"
kind = "autocorrelation"
seed = 3

[autocorrelation]
gates = 50
realizations = 10
max_lag = 5
block_gates = [1, 5]
"""


def _write(tmp_path, text, name="study.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_simulate_then_analyze(tmp_path):
    config = _write(tmp_path, TINY)
    bundle = tmp_path / "bundle"
    assert main(["simulate", "--config", config, "--out", str(bundle)]) == EXIT_OK
    assert (bundle / MANIFEST_FILE).exists()
    rows = _read_csv(bundle / "correlated.csv")
    assert rows[0] == ["seq_id", "realization", "qubit", "shots", "survival", "exact"]
    assert len(rows) == 1 + 4 * 5

    assert main(["analyze", "--bundle", str(bundle)]) == EXIT_OK
    report = json.loads((bundle / REPORT_FILE).read_text())
    assert report["name"] == "tiny"
    assert [r["label"] for r in report["runs"]] == ["correlated", "uncorrelated"]
    assert all(0 < r["mean_error"] < 0.1 for r in report["runs"])
    trajectory = _read_csv(bundle / "uncorrelated_trajectory.csv")
    assert trajectory[0] == ["n", "variance", "low", "high"]
    assert len(trajectory) == 1 + 5
    assert (bundle / "ratios.csv").exists()


def test_simulate_is_reproducible(tmp_path):
    config = _write(tmp_path, TINY)
    for name in ("a", "b"):
        assert main(["simulate", "--config", config, "--out", str(tmp_path / name)]) == EXIT_OK
    a = (tmp_path / "a" / "uncorrelated.csv").read_text()
    assert a == (tmp_path / "b" / "uncorrelated.csv").read_text()

    other = tmp_path / "c"
    assert main(["simulate", "--config", config, "--seed", "8", "--out", str(other)]) == EXIT_OK
    assert a != (other / "uncorrelated.csv").read_text()


def test_workers_do_not_change_results(tmp_path):
    config = _write(tmp_path, TINY)
    main(["simulate", "--config", config, "--out", str(tmp_path / "serial")])
    main(["simulate", "--config", config, "--workers", "2", "--out", str(tmp_path / "pool")])
    for label in ("correlated", "uncorrelated"):
        serial = (tmp_path / "serial" / f"{label}.csv").read_text()
        assert serial == (tmp_path / "pool" / f"{label}.csv").read_text()


def test_failed_check_exit_code(tmp_path):
    config = _write(tmp_path, TINY + FAILING_CHECK)
    bundle = tmp_path / "bundle"
    assert main(["simulate", "--config", config, "--out", str(bundle)]) == EXIT_OK
    report_dir = tmp_path / "report"
    code = main(["analyze", "--bundle", str(bundle), "--out", str(report_dir)])
    assert code == EXIT_CHECK_FAILED
    report = json.loads((report_dir / REPORT_FILE).read_text())
    assert report["checks"][0]["kind"] == "slope"
    assert not report["checks"][0]["passed"]


def test_budget_exceeded(tmp_path):
    config = _write(tmp_path, TINY)
    bundle = tmp_path / "bundle"
    code = main(["simulate", "--config", config, "--out", str(bundle), "--budget-cells", "10"])
    assert code == EXIT_BUDGET_EXCEEDED
    assert not (bundle / MANIFEST_FILE).exists()


def test_config_errors(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG_ERROR
    config = _write(tmp_path, TINY.replace("realizations = 5", "realisations = 5"))
    assert main(["simulate", "--config", config]) == EXIT_CONFIG_ERROR
    assert main(["analyze", "--bundle", str(tmp_path / "nowhere")]) == EXIT_CONFIG_ERROR


def test_schema_mismatch_exit_code(tmp_path):
    config = _write(tmp_path, TINY)
    bundle = tmp_path / "bundle"
    main(["simulate", "--config", config, "--out", str(bundle)])
    manifest = json.loads((bundle / MANIFEST_FILE).read_text())
    manifest["schema_version"] = "0"
    (bundle / MANIFEST_FILE).write_text(json.dumps(manifest))
    assert main(["analyze", "--bundle", str(bundle)]) == EXIT_CONFIG_ERROR


def test_autocorrelation_study(tmp_path):
    config = _write(tmp_path, ACF)
    bundle = tmp_path / "acf"
    assert main(["simulate", "--config", config, "--out", str(bundle)]) == EXIT_OK
    rows = _read_csv(bundle / "autocorrelation.csv")
    assert rows[0] == ["lag", "block_1", "block_5"]
    assert len(rows) == 1 + 6
    assert float(rows[1][1]) == pytest.approx(1.0)
    summary = json.loads((bundle / "autocorrelation.json").read_text())
    assert set(summary) == {"1", "5"}
    manifest = json.loads((bundle / MANIFEST_FILE).read_text())
    assert "autocorrelation.csv" in manifest["outputs"]


def test_predict(tmp_path):
    out = tmp_path / "predict.json"
    assert main(["predict", "--rho2-u", "2e-3", "--out", str(out)]) == EXIT_OK
    record = json.loads(out.read_text())
    assert record["prediction"]["mean_error"] == pytest.approx(0.0804, rel=2e-3)
    assert record["gamma"]["shape"] == pytest.approx(200.0)
    assert all(record["step_moments"]["agrees"].values())


def test_predict_generic_strength(capsys):
    assert main(["predict", "--sigma2", "1e-3", "--regime", "correlated"]) == EXIT_OK
    record = json.loads(capsys.readouterr().out)
    assert record["prediction"]["mean_error"] == pytest.approx(0.0667, abs=1e-4)
    assert record["gamma"]["shape"] == 1.0
    assert main(["predict", "--sigma2", "1e-3", "--regime", "mixed"]) == EXIT_CONFIG_ERROR


def test_predict_reports_step_moment_disagreement(capsys):
    args = ["predict", "--channel", "amplitude", "--bandwidth", "per_pi2_time", "--rho2-c", "1e-4"]
    args += ["--rho2-u", "1e-4"]
    assert main(args) == EXIT_OK
    record = json.loads(capsys.readouterr().out)
    assert record["step_moments"]["agrees"]["e2"] is False
    assert "gamma" not in record


def test_clifford_table(capsys):
    assert main(["clifford-table"]) == EXIT_OK
    records = json.loads(capsys.readouterr().out)
    assert [r["index"] for r in records] == list(range(1, 25))
    assert records[0]["core"] == "wait"


def test_spectrum(tmp_path):
    out = tmp_path / "wait.csv"
    args = ["spectrum", "--omega-max", "10", "--points", "101", "--out", str(out)]
    assert main(args) == EXIT_OK
    rows = _read_csv(out)
    assert rows[0] == ["omega", "re_g_x", "im_g_x", "re_g_y", "im_g_y", "re_g_z", "im_g_z", "power"]
    assert len(rows) == 1 + 101
    first = [float(x) for x in rows[1]]
    assert first[0] == 0.0
    assert first[1:5] == pytest.approx([0.0] * 4, abs=1e-12)
    assert first[5] == pytest.approx(-np.pi / 2)
    assert first[6] == pytest.approx(0.0, abs=1e-12)
    assert first[7] == pytest.approx(np.pi**2 / 4)
    # phase survives: away from zero the wait response is complex
    assert any(abs(float(r[6])) > 1e-3 for r in rows[2:])


def test_spectrum_of_frame_change(tmp_path):
    out = tmp_path / "z.csv"
    assert main(["spectrum", "--clifford", "2", "--family", "corpse", "--out", str(out)]) == EXIT_OK
    rows = _read_csv(out)
    assert all(float(x) == 0.0 for r in rows[1:] for x in r[1:])


def test_parser_rejects_unknown_family():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["spectrum", "--family", "knill"])
