"""The command line workflow: solve, run a sweep from TOML, report on it.

Everything is written under a temporary directory; the printed paths show the
sweep layout (one CSV per cell plus a manifest).
"""
import subprocess
import sys
import tempfile
from pathlib import Path

CONFIG = """
algorithm = "exact"
envs = ["cliffwalk-8"]
archs = ["tabular", "4x4"]
weightings = ["unif", "pi"]
seeds = [0, 1]
projection_steps = 50

[fqi]
iterations = 20

[fit]
max_steps = 30
tol = 0.0
"""


def qdiag(*args):
    print("$ qdiag " + " ".join(args))
    out = subprocess.run([sys.executable, "-m", "qdiag", *args], capture_output=True, text=True)
    print(out.stdout.rstrip())
    return out.stdout.strip()


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "sweep.toml").write_text(CONFIG)
    qdiag("solve", "cliffwalk-8")
    sweep = qdiag("run", "--config", str(tmp / "sweep.toml"), "--out", str(tmp / "out"), "--quiet")
    qdiag("report", "--in", sweep, "--kind", "summary")
    print((Path(sweep) / "summary.csv").read_text())
