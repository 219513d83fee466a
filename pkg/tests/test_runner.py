import json
import math
from pathlib import Path

import numpy as np
import pytest

from qdiag.config import ExperimentConfig
from qdiag.envs import make_env
from qdiag.funcapprox import TABULAR, ArchSpec, FitConfig, load_network
from qdiag.runner import (CSV_COLUMNS, RunRecord, cell_path, csv_to_rows, divergence_rate,
                          expected_cells, find_sweep, load_records, projection_baseline, rows_to_csv,
                          run, run_cell)

GOLDEN = (Path(__file__).parent / "data" / "golden_cell.csv").read_text()

ROWS = [
    {"iter": 1, "return_norm": 0.5, "linf_norm": 0.1, "proj_err_norm": math.nan, "bellman_loss": 1e-5,
     "tv_shift": 0.0, "loss_shift": -0.25, "entropy_norm": 1.0, "diverged": 0},
    {"iter": 2, "return_norm": 1.0, "linf_norm": math.inf, "proj_err_norm": 1 / 3, "bellman_loss": 0.0,
     "tv_shift": 0.125, "loss_shift": 3e-20, "entropy_norm": 1 - 1e-16, "diverged": 1},
]


def small_config(**kw):
    base = dict(envs=("cliffwalk-8",), archs=("tabular", "4x4"), weightings=("unif", "afm"), seeds=(0,),
                projection_steps=5, fqi={"iterations": 3}, fit={"max_steps": 10, "tol": 0.0})
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    cfg = small_config()
    return cfg, out, run(cfg, out=out, jobs=1)


def test_csv_golden_file():
    assert CSV_COLUMNS == ("iter", "return_norm", "linf_norm", "proj_err_norm", "bellman_loss",
                           "tv_shift", "loss_shift", "entropy_norm", "diverged")
    assert rows_to_csv(ROWS) == GOLDEN


def test_csv_round_trip_is_exact():
    back = csv_to_rows(GOLDEN)
    for a, b in zip(back, ROWS):
        for c in CSV_COLUMNS:
            if isinstance(b[c], float) and math.isnan(b[c]):
                assert math.isnan(a[c])
            else:
                assert a[c] == b[c]
    with pytest.raises(ValueError):
        csv_to_rows("iter,return\n1,2\n")


def test_layout_and_manifest(sweep):
    cfg, out, records = sweep
    root = out / cfg.hash
    manifest = json.loads((root / "manifest.json").read_text())
    assert manifest["config_hash"] == cfg.hash
    assert manifest["csv_columns"] == list(CSV_COLUMNS)
    assert {"qdiag", "python", "numpy", "scipy"} <= set(manifest["versions"])
    assert len(manifest["cells"]) == len(cfg.cells())
    for rec in records:
        path = cell_path(root, rec.env, rec.arch, rec.weighting, rec.seed)
        assert path.exists()
        if rec.ok:
            assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
            assert load_network(path.with_suffix(".qnet")).num_actions == 2


def test_failing_cell_is_isolated(sweep):
    cfg, out, records = sweep
    by_key = {(r.arch, r.weighting): r for r in records}
    bad = by_key[("tabular", "afm")]
    assert bad.error.startswith("UnsupportedOperationError")
    assert "Traceback" in bad.error_detail
    root = out / cfg.hash
    assert (cell_path(root, bad.env, bad.arch, bad.weighting, bad.seed).with_suffix(".err")).exists()
    for key in [("tabular", "unif"), ("4x4", "unif"), ("4x4", "afm")]:
        assert by_key[key].ok and len(by_key[key].rows) == 3


def test_tabular_uniform_cell_solves_the_problem():
    cfg = small_config(archs=("tabular",), weightings=("unif",), fqi={"iterations": 200})
    rec = run_cell(cfg, "cliffwalk-8", "tabular", "unif", 0)
    assert rec.final["linf_norm"] < 1e-3
    assert rec.final["proj_err_norm"] == 0.0


def test_rerun_is_byte_identical(sweep, tmp_path):
    cfg, out, _ = sweep
    run(cfg, out=tmp_path, jobs=1)
    for cell in cfg.cells():
        a = cell_path(out / cfg.hash, *cell)
        b = cell_path(tmp_path / cfg.hash, *cell)
        assert a.read_bytes() == b.read_bytes()


def test_parallel_matches_serial(sweep, tmp_path):
    cfg, out, _ = sweep
    run(cfg, out=tmp_path, jobs=2)
    for cell in cfg.cells():
        assert cell_path(out / cfg.hash, *cell).read_bytes() == cell_path(tmp_path / cfg.hash, *cell).read_bytes()


def test_load_records_round_trip(sweep):
    cfg, out, records = sweep
    manifest, loaded = load_records(out)
    assert find_sweep(out) == out / cfg.hash
    assert [r.key for r in loaded] == [r.key for r in records]
    for a, b in zip(loaded, records):
        assert a.error == b.error
        if a.ok:
            np.testing.assert_array_equal(a.column("return_norm"), b.column("return_norm"))
    assert len(expected_cells(manifest)) == len(cfg.cells())


def test_find_sweep_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        find_sweep(tmp_path)


def test_env_seed_pins_layout():
    cfg = small_config(archs=("4x4",), weightings=("unif",), seeds=(0, 1), env_seed=5)
    a, b = run(cfg, jobs=1)
    assert a.ok and b.ok
    # same environment, different network seeds
    assert a.rows != b.rows


def test_divergence_rate():
    ok = RunRecord("h", "e", "a", "w", 0, rows=[{"diverged": 0}])
    bad = RunRecord("h", "e", "a", "w", 1, rows=[{"diverged": 0}, {"diverged": 1}])
    halted = RunRecord("h", "e", "a", "w", 2, halted=True)
    assert divergence_rate([ok, ok]) == 0.0
    assert divergence_rate([bad, halted]) == 1.0
    assert divergence_rate([ok, bad]) == 0.5
    with pytest.raises(ValueError):
        divergence_rate([])


def test_projection_baseline_is_independent_of_fqi():
    _, mdp, obs = make_env("cliffwalk-8", 0)
    mu = np.full((mdp.num_states, mdp.num_actions), 1 / mdp.q_star.size)
    fit = FitConfig(lr=0.1)
    # a table under full support fits Q* exactly
    assert projection_baseline(mdp, obs, TABULAR, mu, 1, fit) < 1e-12
    a = projection_baseline(mdp, obs, ArchSpec("mlp", (16, 16)), mu, 200, FitConfig())
    b = projection_baseline(mdp, obs, ArchSpec("mlp", (16, 16)), mu, 200, FitConfig())
    assert a == b and np.isfinite(a)
    assert math.isnan(projection_baseline(mdp, obs, TABULAR, mu, 0, fit))
