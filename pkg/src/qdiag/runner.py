"""Sweep execution and on-disk persistence.

Layout of a finished sweep::

    <out>/<confighash>/manifest.json
    <out>/<confighash>/<env>/<arch>/<weighting>/<seed>.csv
    <out>/<confighash>/<env>/<arch>/<weighting>/<seed>.qnet     (final network)

Every CSV has exactly the columns in :data:`CSV_COLUMNS`.  Floats are written
with 17 significant digits so reruns are byte-identical.
"""
import csv
import io
import json
import os
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from qdiag.envs import make_env
from qdiag.errors import DivergenceError
from qdiag.fqi import exact_fqi, replay_fqi, sampled_fqi
from qdiag.funcapprox import fit_weighted_projection, forward_q, init_network, save_network

CSV_COLUMNS = ("iter", "return_norm", "linf_norm", "proj_err_norm", "bellman_loss",
               "tv_shift", "loss_shift", "entropy_norm", "diverged")
DRIVERS = {"exact": exact_fqi, "sampled": sampled_fqi, "replay": replay_fqi}


@dataclass
class RunRecord:
    config_hash: str
    env: str
    arch: str
    weighting: str
    seed: int
    rows: list = field(default_factory=list)
    wall_time: float = 0.0
    error: str = ""
    halted: bool = False
    net: object = field(default=None, repr=False, compare=False)
    error_detail: str = field(default="", repr=False, compare=False)

    @property
    def ok(self):
        return not self.error

    @property
    def diverged(self):
        return self.halted or any(r["diverged"] for r in self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=np.float64)

    @property
    def final(self):
        return self.rows[-1] if self.rows else None

    @property
    def key(self):
        return (self.env, self.arch, self.weighting, self.seed)


def projection_baseline(mdp, obs, arch, mu, steps, fit_cfg, seed=0):
    """Normalized l-inf error of the best in-class fit to Q* under ``mu``.

    A fresh network of architecture ``arch`` is fitted directly to Q*, so the
    baseline carries no error from bootstrapping.  Minibatch settings follow
    ``fit_cfg``; the tolerance stop is disabled.
    """
    if steps == 0:
        return float("nan")
    cfg = replace(fit_cfg, max_steps=steps, tol=0.0)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 6]))
    net = init_network(arch, obs.dim, mdp.num_actions, rng, num_states=mdp.num_states)
    try:
        fitted, _ = fit_weighted_projection(net, obs, mdp.q_star, mu, cfg, rng)
    except DivergenceError:
        return float("inf")
    q = forward_q(fitted, obs)
    return float(np.abs(q - mdp.q_star).max() / mdp.expert_returns)


def trace_rows(trace, proj_err):
    rows = []
    for r in trace.records:
        rows.append({"iter": r.iteration, "return_norm": r.return_norm, "linf_norm": r.linf_norm,
                     "proj_err_norm": proj_err, "bellman_loss": r.bellman_loss,
                     "tv_shift": r.tv_shift, "loss_shift": r.loss_shift,
                     "entropy_norm": r.entropy_norm, "diverged": int(r.diverged)})
    if trace.halted and rows:
        rows[-1]["diverged"] = 1
    return rows


def run_cell(config, env, arch, weighting, seed):
    """Run one sweep cell.  Never raises: failures come back as ``record.error``."""
    rec = RunRecord(config.hash, env, arch, weighting, seed)
    start = time.perf_counter()
    try:
        env_seed = seed if config.env_seed is None else config.env_seed
        _, mdp, obs = make_env(env, env_seed, config.discount)
        cfg = config.fqi_config(arch, weighting, seed)
        trace = DRIVERS[config.algorithm](mdp, obs, cfg)
        proj = float("nan")
        if trace.final_net is not None and trace.mus:
            proj = projection_baseline(mdp, obs, cfg.arch, trace.mus[-1],
                                       config.projection_steps, cfg.fit, seed)
        rec.rows = trace_rows(trace, proj)
        rec.halted = trace.halted
        rec.net = trace.final_net
    except Exception as exc:  # isolate the cell
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.error_detail = traceback.format_exc()
    rec.wall_time = time.perf_counter() - start
    return rec


def _run_cell_args(args):
    return run_cell(*args)


def run(config, out=None, jobs=None, progress=None):
    """Execute every cell; persist under ``out/<hash>`` when ``out`` is given.

    ``jobs`` bounds the worker pool (default: logical cores); ``jobs=1`` runs
    in-process.  Results are returned in :meth:`ExperimentConfig.cells` order.
    """
    cells = config.cells()
    jobs = jobs or os.cpu_count() or 1
    args = [(config,) + c for c in cells]
    if jobs == 1 or len(cells) == 1:
        records = []
        for a in args:
            records.append(run_cell(*a))
            if progress:
                progress(records[-1])
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = []
            for rec in pool.map(_run_cell_args, args):
                records.append(rec)
                if progress:
                    progress(rec)
    if out is not None:
        persist(config, records, out)
    return records


def divergence_rate(records):
    if not records:
        raise ValueError("divergence rate needs at least one record")
    return sum(bool(r.diverged) for r in records) / len(records)


# -- persistence -------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def csv_to_rows(text):
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns {header}")
    rows = []
    for line in reader:
        r = {c: float(v) for c, v in zip(CSV_COLUMNS, line)}
        r["iter"] = int(r["iter"])
        r["diverged"] = int(r["diverged"])
        rows.append(r)
    return rows


def cell_path(root, env, arch, weighting, seed):
    return Path(root) / env / arch / weighting / f"{seed}.csv"


def persist(config, records, out):
    root = Path(out) / config.hash
    cells = []
    for rec in records:
        path = cell_path(root, rec.env, rec.arch, rec.weighting, rec.seed)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(rows_to_csv(rec.rows))
        if rec.net is not None:
            save_network(rec.net, path.with_suffix(".qnet"))
        entry = {"env": rec.env, "arch": rec.arch, "weighting": rec.weighting, "seed": rec.seed,
                 "status": "error" if rec.error else ("halted" if rec.halted else "ok"),
                 "diverged": bool(rec.diverged), "wall_time": round(rec.wall_time, 3),
                 "path": str(path.relative_to(root))}
        if rec.error:
            entry["error"] = rec.error
            path.with_suffix(".err").write_text(rec.error_detail or rec.error)
        cells.append(entry)
    manifest = {
        "config_hash": config.hash,
        "config": config.canonical(),
        "versions": {"qdiag": _version(), "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "csv_columns": list(CSV_COLUMNS),
        "divergence_rate": divergence_rate(records) if records else 0.0,
        "cells": cells,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return root


def _version():
    from qdiag import __version__
    return __version__


def find_sweep(path):
    """Resolve ``path`` to the directory holding ``manifest.json``."""
    root = Path(path)
    if (root / "manifest.json").exists():
        return root
    subs = [p for p in root.iterdir() if (p / "manifest.json").exists()] if root.is_dir() else []
    if len(subs) != 1:
        raise FileNotFoundError(f"no single manifest.json under {path}")
    return subs[0]


def load_records(path):
    """Read every cell listed in a sweep's ``manifest.json``.

    ``path`` may be the hash directory itself or its parent when it holds exactly
    one sweep.
    """
    root = find_sweep(path)
    manifest = json.loads((root / "manifest.json").read_text())
    records = []
    for cell in manifest["cells"]:
        rec = RunRecord(manifest["config_hash"], cell["env"], cell["arch"], cell["weighting"], cell["seed"],
                        wall_time=cell.get("wall_time", 0.0), error=cell.get("error", ""),
                        halted=cell["status"] == "halted")
        csv_path = root / cell["path"]
        if csv_path.exists():
            rec.rows = csv_to_rows(csv_path.read_text())
        elif not rec.error:
            rec.error = "missing CSV"
        records.append(rec)
    return manifest, records


def expected_cells(manifest):
    c = manifest["config"]
    return [(e, a, w, s) for e in c["envs"] for a in c["archs"] for w in c["weightings"] for s in c["seeds"]]
