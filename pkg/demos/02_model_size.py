"""Model size: how far FQI lands from the best network in the class.

For each architecture we run Exact-FQI and also fit Q* directly under the same
weighting.  The difference between the two errors is the part of the error
that comes from iterating projections rather than from limited capacity.
"""
from qdiag.config import ExperimentConfig
from qdiag.runner import run

cfg = ExperimentConfig(envs=("cliffwalk-16",), archs=("4x4", "16x16", "64x64"), seeds=(0,),
                       projection_steps=2000, fqi={"iterations": 40},
                       fit={"max_steps": 50, "batch_size": 256, "tol": 0.0})
print(f"{'arch':>6} {'return':>7} {'FQI err':>8} {'proj err':>8} {'gap':>7}")
for rec in run(cfg, jobs=1):
    f = rec.rows[-1]
    print(f"{rec.arch:>6} {f['return_norm']:7.3f} {f['linf_norm']:8.3f} {f['proj_err_norm']:8.3f} "
          f"{f['linf_norm'] - f['proj_err_norm']:7.3f}")
