import subprocess
import sys

import pytest

from epibandit import harness
from epibandit.cli import EXIT_CONFIG, EXIT_MISSING, EXIT_OK, main


def test_threshold(capsys):
    assert main(["threshold", "--r0", "1.4"]) == EXIT_OK
    out = capsys.readouterr().out.split()
    p_ext, t0 = harness.cmd_threshold(1.4)
    assert out == ["p_ext", repr(p_ext), "T0", str(t0)]


def test_threshold_exact_power(capsys):
    # a fully controlled fraction of 0 and cutoff 0.5 with p_ext < 0.5 gives T0 = 1
    assert main(["threshold", "--r0", "3.0", "--cutoff", "0.5", "--dispersion", "5"]) == EXIT_OK
    assert capsys.readouterr().out.split()[-1] == "1"


def test_threshold_subcritical(capsys):
    code = main(["threshold", "--r0", "1.1", "--controlled-fraction", "0.2"])
    assert code == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_threshold_invalid(capsys):
    assert main(["threshold", "--r0", "1.4", "--cutoff", "2"]) == EXIT_CONFIG


@pytest.mark.parametrize("command", ["benchmark", "calibration"])
def test_missing_prerequisites(tmp_path, command):
    assert main([command, "--out", str(tmp_path)]) == EXIT_MISSING


@pytest.mark.parametrize("command", ["ground-truth", "benchmark", "calibration"])
def test_config_error(tmp_path, command):
    path = tmp_path / "bad.yaml"
    path.write_text("no_such_key: 3\n")
    assert main([command, "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_pipeline(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("r0_list: [1.6]\nbudgets: [70, 100]\nreplicates: 2\nground_truth_runs: 3\n"
                   "environment: synthetic\n")
    common = ["--config", str(cfg), "--out", str(tmp_path), "--seed", "4", "--workers", "1"]
    assert main(["ground-truth", *common]) == EXIT_OK
    assert main(["benchmark", *common]) == EXIT_OK
    assert main(["calibration", *common]) == EXIT_OK
    for name in (harness.GROUND_TRUTH_FILE, harness.BENCHMARK_FILE, harness.SUMMARY_FILE,
                 harness.CALIBRATION_FILE):
        assert (tmp_path / name).stat().st_size > 0
    runs = harness.read_run_records(tmp_path)
    assert len(runs) == 4 * 2 * 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "epibandit", "threshold", "--r0", "0.9"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG
