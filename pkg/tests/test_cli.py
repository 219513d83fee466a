import subprocess
import sys

import pytest

from qdiag.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main

SWEEP = """
envs = ["cliffwalk-8"]
archs = ["4x4"]
weightings = ["unif", "pi"]
seeds = [0, 1]
projection_steps = 5
[fqi]
iterations = 3
[fit]
max_steps = 10
tol = 0.0
"""


def test_solve_prints_oracle_facts(capsys):
    assert main(["solve", "cliffwalk-16"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "S=16 A=2" in out
    eta = float(out.split("expert_returns=")[1].split()[0])
    assert eta == pytest.approx(0.95 ** 15 / 0.05, abs=1e-6)


def test_solve_unknown_env_suggests(capsys):
    assert main(["solve", "gridworld-16-randm"]) == EXIT_USAGE
    assert "gridworld-16-random" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["report", "--in", "x", "--kind", "pie"]) == EXIT_USAGE
    assert main(["run", "--config", "missing.toml"]) == EXIT_USAGE
    assert main(["run", "--config", "x.toml", "--jobs", "0"]) == EXIT_USAGE


def test_run_then_report(tmp_path, capsys):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--jobs", "1"]) == EXIT_OK
    captured = capsys.readouterr()
    sweep_dir = captured.out.strip().splitlines()[-1]
    assert "[4/4]" in captured.err
    for kind, names in (("summary", ["summary.csv"]), ("table1", ["table1.csv"]),
                        ("plots", ["returns_vs_iteration.svg", "entropy_vs_return.svg", "shift_vs_return.svg"])):
        assert main(["report", "--in", str(out), "--kind", kind]) == EXIT_OK
        printed = capsys.readouterr().out
        for name in names:
            assert name in printed
            assert (tmp_path / "out" / sweep_dir.split("/")[-1] / name).exists()


def test_failed_cells_give_exit_one(tmp_path, capsys):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP.replace('archs = ["4x4"]', 'archs = ["tabular"]').replace('"pi"]', '"afm"]'))
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--jobs", "1", "--quiet"])
    assert code == EXIT_FAILURE
    assert "2 of 4 cells failed" in capsys.readouterr().err


def test_seed_override_from_environment(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(SWEEP)
    monkeypatch.setenv("QDIAG_SEED", "9")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--jobs", "1"]) == EXIT_OK
    err = capsys.readouterr().err
    assert "seed=9" in err and "seed=0" not in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qdiag", "solve", "cliffwalk-4", "--discount", "0.5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "expert_returns=0.25" in proc.stdout
