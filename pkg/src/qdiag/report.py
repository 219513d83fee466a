"""Aggregate CSVs, the replay-overlay return matrix and static SVG plots."""
import csv
import warnings
from collections import defaultdict
from pathlib import Path

import numpy as np
from scipy import stats

from qdiag.fqi import REPLAY_OVERLAYS

SUMMARY_METRICS = ("return_norm", "linf_norm", "proj_err_norm", "bellman_loss",
                   "tv_shift", "loss_shift", "entropy_norm", "diverged")
TABLE1_ROWS = REPLAY_OVERLAYS
KINDS = ("summary", "table1", "plots")


def run_scalars(record):
    """Collapse a run to one value per metric.

    Final-iteration values for the return and error metrics; iteration means
    for the shift and entropy diagnostics (the first iteration has no shift and
    is skipped); ``diverged`` is 1 if any iteration was flagged.
    """
    rows = record.rows
    if not rows:
        return None
    last = rows[-1]
    out = {m: float(last[m]) for m in ("return_norm", "linf_norm", "proj_err_norm", "bellman_loss")}
    later = rows[1:] or rows
    for m in ("tv_shift", "loss_shift"):
        out[m] = float(np.mean([r[m] for r in later]))
    out["entropy_norm"] = float(np.mean([r["entropy_norm"] for r in rows]))
    out["diverged"] = float(record.diverged)
    return out


def mean_stderr(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return float("nan"), float("nan")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def aggregate(records, expected=None):
    """Mean and standard error over seeds, keyed by ``(env, arch, weighting)``.

    Keys listed in ``expected`` without any usable record appear with ``n = 0``.
    """
    groups = defaultdict(list)
    for rec in records:
        s = run_scalars(rec) if rec.ok else None
        if s is not None:
            groups[(rec.env, rec.arch, rec.weighting)].append(s)
    keys = list(dict.fromkeys(list(expected or []) + [(r.env, r.arch, r.weighting) for r in records]))
    out = {}
    for key in keys:
        runs = groups.get(key, [])
        out[key] = {"n": len(runs)}
        for m in SUMMARY_METRICS:
            out[key][m] = mean_stderr([r[m] for r in runs])
    return out


def _num(x):
    return "" if x is None or not np.isfinite(x) else format(x, ".6g")


def write_summary(records, path, expected=None):
    agg = aggregate(records, expected)
    header = ["env", "arch", "weighting", "n_seeds"]
    for m in SUMMARY_METRICS:
        header += [f"{m}_mean", f"{m}_stderr"]
    header.append("warning")
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for (env, arch, weighting), cell in agg.items():
            row = [env, arch, weighting, cell["n"]]
            for m in SUMMARY_METRICS:
                row += [_num(cell[m][0]), _num(cell[m][1])]
            warning = "" if cell["n"] else "missing cell"
            if warning:
                warnings.warn(f"no results for {env}/{arch}/{weighting}")
            w.writerow(row + [warning])
    return path


def table1(records):
    """Mean final normalized return per (overlay, arch), averaged over envs and seeds."""
    archs = list(dict.fromkeys(r.arch for r in records))
    finals = defaultdict(list)
    for rec in records:
        if rec.ok and rec.rows:
            finals[(rec.weighting, rec.arch)].append(rec.rows[-1]["return_norm"])
    return archs, {(w, a): mean_stderr(finals[(w, a)]) if finals[(w, a)] else None
                   for w in TABLE1_ROWS for a in archs}


def write_table1(records, path):
    archs, cells = table1(records)
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["weighting"] + [f"{a}_mean" for a in archs] + [f"{a}_stderr" for a in archs] + ["warning"])
        for row in TABLE1_ROWS:
            vals = [cells[(row, a)] for a in archs]
            missing = [a for a, v in zip(archs, vals) if v is None]
            w.writerow([row] + [_num(v[0]) if v else "" for v in vals]
                       + [_num(v[1]) if v else "" for v in vals]
                       + ["missing: " + " ".join(missing) if missing else ""])
    return path


def rank_correlation(x, y):
    """Spearman correlation; 0 when either side is constant."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(stats.spearmanr(x, y).statistic)


def write_plots(records, out_dir):
    """Write returns-vs-iteration, entropy-vs-return and shift-vs-return SVGs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "qdiag"}):
        return _draw(plt, [r for r in records if r.ok and r.rows], out_dir)


def _draw(plt, ok, out_dir):
    paths = []

    curves = defaultdict(list)
    for rec in ok:
        curves[(rec.arch, rec.weighting)].append(rec.column("return_norm"))
    fig, ax = plt.subplots(figsize=(6, 4))
    for (arch, weighting), runs in sorted(curves.items()):
        n = min(len(c) for c in runs)
        ax.plot(np.arange(1, n + 1), np.mean([c[:n] for c in runs], axis=0), label=f"{arch} / {weighting}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("normalized return")
    if curves:
        ax.legend(fontsize=6)
    paths.append(_save(fig, out_dir / "returns_vs_iteration.svg"))

    scal = [(rec, run_scalars(rec)) for rec in ok]
    for metric, fname, label in (("entropy_norm", "entropy_vs_return.svg", "normalized entropy"),
                                 ("tv_shift", "shift_vs_return.svg", "mean TV shift")):
        fig, ax = plt.subplots(figsize=(5, 4))
        xs = [s[metric] for _, s in scal]
        ys = [s["return_norm"] for _, s in scal]
        ax.scatter(xs, ys, s=10)
        ax.set_xlabel(label)
        ax.set_ylabel("final normalized return")
        ax.set_title(f"Spearman {rank_correlation(xs, ys):+.2f}")
        paths.append(_save(fig, out_dir / fname))
    plt.close("all")
    return paths


def _save(fig, path):
    # fixed metadata keeps the files reproducible
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def report(records, kind, out_dir, expected=None):
    """Emit one report kind into ``out_dir`` and return the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "summary":
        return [write_summary(records, out_dir / "summary.csv", expected)]
    if kind == "table1":
        return [write_table1(records, out_dir / "table1.csv")]
    if kind == "plots":
        return write_plots(records, out_dir)
    raise ValueError(f"report kind must be one of {KINDS}")
