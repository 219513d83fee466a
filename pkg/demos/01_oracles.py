"""Oracles: the exact quantities every diagnostic is measured against.

We build a small gridworld and solve it exactly.  Tabular FQI should then
converge to Q*, and the exact occupancy should agree with rollouts.  Finally we
compare the contraction of the smoothed backup with its predicted rate.
"""
import numpy as np

from qdiag.envs import make_env
from qdiag.fqi import FQIConfig, exact_fqi
from qdiag.funcapprox import TABULAR
from qdiag.mdp import alpha_smoothed_backup, greedy_policy, occupancy

spec, mdp, obs = make_env("gridworld-16-onehot", seed=0)
print(f"{spec.canonical_name}: {mdp.num_states} states, {mdp.num_actions} actions, gamma={mdp.discount}")
print(f"optimal return (the normalizer for every metric): {mdp.expert_returns:.4f}")

# Tabular Exact-FQI is value iteration, so the error falls like gamma^t.
trace = exact_fqi(mdp, obs, FQIConfig(iterations=150, arch=TABULAR, weighting="unif"))
for t in (0, 9, 49, 149):
    r = trace.records[t]
    print(f"  iter {t + 1:3d}: return {r.return_norm:.4f}  linf error {r.linf_norm:.2e}")

# Exact occupancy of an epsilon-greedy policy versus a crude rollout estimate.
rng = np.random.default_rng(0)
pol = greedy_policy(mdp.q_star, 0.2)
mu = occupancy(mdp, pol)
n, horizon = 20_000, 200
s = rng.choice(mdp.num_states, size=n, p=mdp.initial_dist)
counts = np.zeros_like(mu)
for t in range(horizon):
    a = (rng.random(n)[:, None] > np.cumsum(pol[s], axis=1)).sum(axis=1).clip(max=mdp.num_actions - 1)
    np.add.at(counts, (s, a), mdp.discount ** t)
    s = mdp.sample_next_states(s, a, rng)
print(f"TV(exact occupancy, {n} rollouts) = {0.5 * np.abs(counts / counts.sum() - mu).sum():.4f}")

# The alpha-smoothed backup contracts at rate 1 - alpha + alpha * gamma.
q1, q2 = rng.normal(size=(2, mdp.num_states, mdp.num_actions))
for alpha in (1.0, 0.5, 0.1):
    ratio = np.abs(alpha_smoothed_backup(mdp, q1, alpha) - alpha_smoothed_backup(mdp, q2, alpha)).max() \
        / np.abs(q1 - q2).max()
    print(f"  alpha={alpha}: observed ratio {ratio:.3f} <= bound {1 - alpha + alpha * mdp.discount:.3f}")
