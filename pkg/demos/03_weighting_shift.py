"""Weighting distributions: shift between iterations and spread over pairs.

Exact-FQI is run with several weightings.  For each we report the final return
next to two diagnostics: the mean total-variation distance between consecutive
weightings and the mean normalized entropy.  Replay-style mixtures move slowly; on-policy and prioritized
weightings jump around.
"""
from qdiag.config import ExperimentConfig
from qdiag.report import run_scalars
from qdiag.runner import run

cfg = ExperimentConfig(envs=("gridworld-16-random",), archs=("16x16",),
                       weightings=("unif", "pi", "prioritized", "replay", "replay10"), seeds=(0,),
                       projection_steps=0, fqi={"iterations": 30},
                       fit={"max_steps": 50, "batch_size": 256, "tol": 0.0})
print(f"{'weighting':>11} {'TV shift':>9} {'entropy':>8} {'return':>7}")
for rec in run(cfg, jobs=1):
    s = run_scalars(rec)
    print(f"{rec.weighting:>11} {s['tv_shift']:9.4f} {s['entropy_norm']:8.3f} {s['return_norm']:7.3f}")
