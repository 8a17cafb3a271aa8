import csv
import shutil

import pytest

from finitemc.cli import main


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_solve_writes_distribution_and_certificate(tmp_path, capsys):
    code = main(["solve", "--model", "a", "--r", "3", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "states = 9" in out
    assert "e1 = " in out and "e2 = " in out
    assert "no_wait:" in out
    dist = _read(tmp_path / "finite_r3.csv")
    assert dist[0] == ["location", "mass"]
    assert len(dist) == 1 + 9
    cert = _read(tmp_path / "certificate_r3.csv")
    assert cert[0] == ["r", "e1", "e2", "dist_bound", "argmin_k"]
    assert int(cert[1][0]) == 3


def test_solve_skips_certificate_above_cap(capsys):
    code = main(["solve", "--model", "a", "--r", "5", "--cert-max-r", "4"])
    out = capsys.readouterr().out
    assert code == 0
    assert "certificate skipped" in out
    assert "e2 = " not in out


def test_check_passes_on_builtin_model(capsys):
    code = main(["check", "--model", "a", "--r", "3"])
    out = capsys.readouterr().out
    assert code == 0
    assert "check passed" in out
    assert "FAIL" not in out


def test_fluid_reports_settling_point(capsys):
    code = main(["fluid", "--model", "a", "--grid", "1000"])
    out = capsys.readouterr().out
    assert code == 0
    line = next(l for l in out.splitlines() if l.startswith("w_fluid"))
    assert float(line.split("=")[1]) == pytest.approx(0.0585, abs=5e-4)
    residue = next(l for l in out.splitlines() if l.startswith("l_inf"))
    assert 0.5 < float(residue.split("=")[1]) < 0.6


def test_mcmc_writes_samples_and_statistics(tmp_path, capsys):
    code = main(
        ["mcmc", "--model", "a", "--r", "3", "--seed", "1", "--grid", "1000",
         "--out", str(tmp_path)]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "abandonment: mean = " in out
    samples = _read(tmp_path / "mcmc_r3_seed1_samples.csv")
    assert samples[0] == ["index", "w"]
    assert len(samples) == 1 + 9
    stats = _read(tmp_path / "mcmc_r3_seed1_stats.csv")
    assert stats[0] == ["functional", "mean", "ci_half_width", "N", "seed"]
    assert len(stats) == 4


def test_bench_runs_plan_file(tmp_path, capsys):
    plan = tmp_path / "plan.txt"
    plan.write_text(
        "model = a\nmethods = fluid\nladder = 3\nresidue_grid = 1000\n"
        f"out = {tmp_path / 'artifacts'}\n"
    )
    code = main(["bench", "--config", str(plan)])
    out = capsys.readouterr().out
    assert code == 0
    assert "wrote" in out
    rows = _read(tmp_path / "artifacts" / "residues.csv")
    assert rows[1][0] == "fluid" and rows[1][5] == "ok"


def test_bench_out_flag_overrides_plan(tmp_path, capsys):
    plan = tmp_path / "plan.txt"
    plan.write_text("model = a\nmethods = fluid\nresidue_grid = 1000\nout = ignored\n")
    code = main(["bench", "--config", str(plan), "--out", str(tmp_path / "here")])
    assert code == 0
    assert (tmp_path / "here" / "residues.csv").exists()
    capsys.readouterr()


def test_missing_config_file_exits_cleanly(tmp_path, capsys):
    code = main(["residue", "--config", str(tmp_path / "nope.txt"), "--r", "3"])
    captured = capsys.readouterr()
    assert code == 2
    assert "error:" in captured.err


def test_underloaded_model_fluid_exits_cleanly(tmp_path, capsys):
    config = tmp_path / "under.txt"
    config.write_text("lambda = 3.9\nmu = 4.0\n")
    code = main(["fluid", "--config", str(config), "--grid", "1000"])
    captured = capsys.readouterr()
    assert code == 2
    assert "overload" in captured.err


def test_console_script_is_installed():
    assert shutil.which("finitemc") is not None
