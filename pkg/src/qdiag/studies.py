"""Desk-scale experiment drivers for the diagnostic studies.

Each function runs one study through :func:`qdiag.runner.run` (or the FQI
drivers directly) and returns a :class:`StudyResult` whose ``stats`` hold the
aggregate numbers the study is judged by.  Defaults are sized for a single CPU
core; every knob is a keyword argument so tests can shrink them further.
"""
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from qdiag.config import ExperimentConfig
from qdiag.envs import SUITE_NAMES, make_env
from qdiag.fqi import FQIConfig, exact_fqi, retrace_validation
from qdiag.funcapprox import ArchSpec, FitConfig
from qdiag.report import rank_correlation, run_scalars
from qdiag.runner import run
from qdiag.weighting import TAGS

SWEEP_ARCH_NAMES = ("4x4", "16x16", "64x64", "256x256")
SEEDS5 = (0, 1, 2, 3, 4)
ADAPTIVE_WEIGHTINGS = ("pi", "prioritized", "replay", "replay10")


@dataclass
class StudyResult:
    name: str
    stats: dict
    records: list = field(default_factory=list)
    wall_time: float = 0.0


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        result.wall_time = time.perf_counter() - start
        return result
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _group_mean(records, key, metric="return_norm"):
    groups = defaultdict(list)
    for rec in records:
        s = run_scalars(rec) if rec.ok else None
        if s is not None:
            groups[key(rec)].append(s[metric])
    return {k: float(np.mean(v)) for k, v in groups.items()}


@_timed
def architecture_sweep(envs=SUITE_NAMES, archs=SWEEP_ARCH_NAMES, seeds=SEEDS5, iterations=100,
                       steps=50, batch_size=256, projection_steps=2000, weighting="unif", jobs=1):
    """Exact-FQI over architectures: returns alongside FQI and projection errors.

    ``gap`` is the mean of (final l-inf error of FQI) minus (l-inf error of the
    in-class projection of Q*), both normalized by the expert return.
    """
    cfg = ExperimentConfig(envs=envs, archs=archs, weightings=(weighting,), seeds=seeds,
                           projection_steps=projection_steps, fqi={"iterations": iterations},
                           fit={"max_steps": steps, "batch_size": batch_size, "tol": 0.0})
    records = run(cfg, jobs=jobs)
    by_arch = {"return": {}, "fqi_error": {}, "proj_error": {}, "gap": {}}
    for arch in cfg.archs:
        recs = [r for r in records if r.arch == arch and r.ok and r.rows]
        fin = [r.rows[-1] for r in recs]
        by_arch["return"][arch] = float(np.mean([f["return_norm"] for f in fin]))
        by_arch["fqi_error"][arch] = float(np.mean([f["linf_norm"] for f in fin]))
        by_arch["proj_error"][arch] = float(np.mean([f["proj_err_norm"] for f in fin]))
        by_arch["gap"][arch] = float(np.mean([f["linf_norm"] - f["proj_err_norm"] for f in fin]))
    by_arch["archs"] = list(cfg.archs)
    return StudyResult("architecture_sweep", by_arch, records)


@_timed
def sample_budget_sweep(envs=SUITE_NAMES, budgets=(8, 32, 128, 512), seeds=SEEDS5, iterations=60,
                        steps=50, arch="64x64", weighting="unif", jobs=1):
    """Sampled-FQI with ``M`` pairs per iteration for each budget ``M``."""
    records, means = [], {}
    for m in budgets:
        cfg = ExperimentConfig(envs=envs, algorithm="sampled", archs=(arch,), weightings=(weighting,),
                               seeds=seeds, projection_steps=0,
                               fqi={"iterations": iterations, "samples_per_iter": m},
                               fit={"max_steps": steps, "tol": 0.0})
        recs = run(cfg, jobs=jobs)
        records += recs
        means[m] = float(np.mean([r.rows[-1]["return_norm"] for r in recs if r.ok and r.rows]))
    stats = {"mean_return": means,
             "spearman": rank_correlation(list(means), [means[m] for m in means])}
    return StudyResult("sample_budget_sweep", stats, records)


@_timed
def retrace_study(envs=SUITE_NAMES, budgets=(32, 128), seeds=(0, 1), iterations=15, steps=100,
                  arch="64x64", reference_weighting="pi"):
    """Replay a reference Exact-FQI run with limited on-policy or buffered data.

    Reports the on-policy validation error per ``(source, budget)`` averaged over
    iterations and runs.  The exact row uses unlimited data.
    """
    fit = FitConfig(max_steps=steps, tol=0.0)
    rows = defaultdict(list)
    for env in envs:
        for seed in seeds:
            _, mdp, obs = make_env(env, seed)
            ref_cfg = FQIConfig(iterations=iterations, weighting=reference_weighting,
                                arch=ArchSpec.parse(arch), fit=fit, seed=seed)
            ref = exact_fqi(mdp, obs, ref_cfg, keep_nets=True)
            if ref.halted:
                continue
            table = retrace_validation(ref, mdp, obs, list(budgets) + [math.inf], fit, seed=seed)
            for key, losses in table.items():
                rows[key].append(float(np.mean(losses)))
    stats = {"validation_loss": {k: float(np.mean(v)) for k, v in rows.items()}}
    return StudyResult("retrace_study", stats)


@_timed
def grad_step_ablation(envs=SUITE_NAMES, ratios=(1, 4, 16, 64), seeds=(0, 1, 2), iterations=30,
                       online_samples=32, batch=128, arch="64x64", jobs=1):
    """Replay-FQI with ``ratio * online_samples`` gradient steps per iteration."""
    records, means = [], {}
    for ratio in ratios:
        cfg = ExperimentConfig(envs=envs, algorithm="replay", archs=(arch,), weightings=("none",),
                               seeds=seeds, projection_steps=0,
                               fqi={"iterations": iterations, "online_samples_per_iter": online_samples,
                                    "samples_per_iter": batch, "grad_steps_ratio": ratio},
                               fit={"snapshot_every": 10 ** 6})
        recs = run(cfg, jobs=jobs)
        records += recs
        means[ratio] = float(np.mean([r.rows[-1]["return_norm"] for r in recs if r.ok and r.rows]))
    largest = max(ratios)
    best_interior = max((r for r in ratios if r not in (min(ratios), largest)), key=means.get)
    stats = {"mean_return": means, "best_interior": best_interior, "largest": largest}
    return StudyResult("grad_step_ablation", stats, records)


@_timed
def early_stopping_study(envs=SUITE_NAMES, modes=("none", "oracle_return"), seeds=SEEDS5,
                         iterations=30, ratio=16, snapshot_every=32, arch="64x64", jobs=1):
    """Replay-FQI with long projections, with and without oracle snapshot selection."""
    records, means = [], {}
    for mode in modes:
        cfg = ExperimentConfig(envs=envs, algorithm="replay", archs=(arch,), weightings=("none",),
                               seeds=seeds, projection_steps=0,
                               fqi={"iterations": iterations, "grad_steps_ratio": ratio, "early_stop": mode},
                               fit={"snapshot_every": snapshot_every})
        recs = run(cfg, jobs=jobs)
        records += recs
        means[mode] = float(np.mean([r.rows[-1]["return_norm"] for r in recs if r.ok and r.rows]))
    return StudyResult("early_stopping_study", {"mean_return": means}, records)


@_timed
def weighting_sweep(envs=SUITE_NAMES, weightings=TAGS, seeds=(0, 1, 2), iterations=60, steps=50,
                    batch_size=256, arch="64x64", afm_inner_steps=2, jobs=1):
    """Exact-FQI over weighting distributions with shift and entropy diagnostics."""
    cfg = ExperimentConfig(envs=envs, archs=(arch,), weightings=weightings, seeds=seeds,
                           projection_steps=0, fqi={"iterations": iterations},
                           fit={"max_steps": steps, "batch_size": batch_size, "tol": 0.0},
                           afm={"inner_steps": afm_inner_steps})
    records = run(cfg, jobs=jobs)
    w = lambda r: r.weighting  # noqa: E731
    ret = _group_mean(records, w, "return_norm")
    tv = _group_mean(records, w, "tv_shift")
    ent = _group_mean(records, w, "entropy_norm")
    names = [x for x in cfg.weightings if x in ret]
    stats = {
        "mean_return": ret,
        "mean_tv_shift": tv,
        "mean_entropy": ent,
        "tv_return_spearman": rank_correlation([tv[x] for x in names], [ret[x] for x in names]),
        "entropy_return_spearman": rank_correlation([ent[x] for x in names], [ret[x] for x in names]),
    }
    return StudyResult("weighting_sweep", stats, records)


@_timed
def overlay_table(envs=SUITE_NAMES, archs=("16x16", "64x64"), overlays=None, seeds=SEEDS5,
                  iterations=30, ratio=4, afm=None, jobs=1):
    """Replay-FQI over buffer weighting overlays: the return matrix by architecture."""
    from qdiag.fqi import REPLAY_OVERLAYS
    overlays = overlays or REPLAY_OVERLAYS
    cfg = ExperimentConfig(envs=envs, algorithm="replay", archs=archs, weightings=overlays, seeds=seeds,
                           projection_steps=0, fqi={"iterations": iterations, "grad_steps_ratio": ratio},
                           fit={"snapshot_every": 10 ** 6}, afm=afm or {})
    records = run(cfg, jobs=jobs)
    table = _group_mean(records, lambda r: (r.weighting, r.arch), "return_norm")
    return StudyResult("overlay_table", {"table": table, "archs": list(cfg.archs)}, records)
