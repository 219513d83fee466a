"""Divergence with linear features even though the backup contracts.

Two states carry features 1 and 2.  Only the first is sampled, and its one
transition leads to the second.  Each least-squares projection multiplies the weight
by 2 * gamma, so it blows up once gamma exceeds one half.
"""
import numpy as np

from qdiag.fqi import counterexample_divergence_demo

for gamma in (0.4, 0.5, 0.9):
    w = counterexample_divergence_demo(gamma, 10)
    print(f"gamma={gamma}: " + " ".join(f"{x:.3g}" for x in w))
w = counterexample_divergence_demo(0.9, 10)
print("at gamma=0.9 the weight is 1.8^t to machine precision:", bool(np.allclose(w, 1.8 ** np.arange(11), rtol=1e-12, atol=0)))
