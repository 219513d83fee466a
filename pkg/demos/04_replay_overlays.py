"""Replay-FQI with reweighted buffers, including the adversarial weighting.

Transitions are gathered online with an epsilon-greedy policy.  Each overlay
changes how the sampled minibatch is weighted (or resampled) before fitting.
"""
from qdiag.config import ExperimentConfig
from qdiag.runner import run

cfg = ExperimentConfig(envs=("gridworld-16-onehot",), algorithm="replay", archs=("16x16",),
                       weightings=("none", "unif", "per", "afm", "afm_sampling"), seeds=(0,),
                       projection_steps=0, fqi={"iterations": 30, "grad_steps_ratio": 4})
for rec in run(cfg, jobs=1):
    returns = rec.column("return_norm")
    print(f"{rec.weighting:>13}: final return {returns[-1]:.3f}  best {max(returns):.3f}")
