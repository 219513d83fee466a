"""Weighting distributions over state-action pairs and distribution diagnostics."""
from dataclasses import dataclass, field

import numpy as np

from qdiag.errors import ConfigurationError
from qdiag.mdp import bellman_backup, greedy_policy, occupancy, uniform_policy

TAGS = ("unif", "pi", "pistar", "random", "prioritized", "replay", "replay10", "afm")
_ALIASES = {"pi_star": "pistar", "uniform": "unif"}
REPLAY_WINDOW = 10
PRIORITY_FLOOR = 1e-8


@dataclass(frozen=True)
class WeightingKind:
    tag: str
    epsilon: float = 0.1

    def __post_init__(self):
        tag = _ALIASES.get(self.tag, self.tag)
        if tag not in TAGS:
            raise ConfigurationError(f"unknown weighting {self.tag!r}; expected one of {TAGS}")
        object.__setattr__(self, "tag", tag)

    @property
    def needs_history(self):
        return self.tag in ("replay", "replay10")


@dataclass
class WeightingContext:
    """What ``make_distribution`` may look at.

    ``history`` holds the on-policy occupancies of earlier iterations;
    ``afm`` is a zero-argument callable returning the adversary's distribution.
    """

    mdp: object
    q: np.ndarray = None
    q_star: np.ndarray = None
    history: list = field(default_factory=list)
    afm: object = None


def uniform(num_states, num_actions):
    return np.full((num_states, num_actions), 1.0 / (num_states * num_actions))


def on_policy(mdp, q, epsilon):
    return occupancy(mdp, greedy_policy(q, epsilon))


def make_distribution(kind, ctx):
    """Build the weighting distribution named by ``kind`` for the current iteration.

    ``replay`` averages the stored occupancies together with the current
    on-policy one; ``replay10`` keeps only the latest 10 stored entries plus the
    current one.
    """
    mdp = ctx.mdp
    S, A = mdp.num_states, mdp.num_actions
    tag = kind.tag
    if tag == "unif":
        return uniform(S, A)
    if tag == "pistar":
        q_star = ctx.q_star if ctx.q_star is not None else mdp.q_star
        return occupancy(mdp, greedy_policy(q_star, 0.0))
    if tag == "random":
        return occupancy(mdp, uniform_policy(S, A))
    if tag == "afm":
        if ctx.afm is None:
            raise ConfigurationError("afm weighting needs an adversary")
        return ctx.afm()
    if ctx.q is None:
        raise ConfigurationError(f"{tag} weighting needs the current Q")
    if tag == "pi":
        return on_policy(mdp, ctx.q, kind.epsilon)
    if tag == "prioritized":
        return prioritized(mdp, ctx.q)
    current = on_policy(mdp, ctx.q, kind.epsilon)
    past = ctx.history if tag == "replay" else ctx.history[-REPLAY_WINDOW:]
    return np.mean(list(past) + [current], axis=0)


def prioritized(mdp, q):
    """Weights proportional to ``|Q - TQ|``; uniform if the error vanishes.

    Errors below ``PRIORITY_FLOOR * (1 + max|Q|)`` count as zero, so a solver
    fixed point that is exact up to round-off still gives the uniform fallback.
    """
    err = np.abs(q - bellman_backup(mdp, q))
    total = err.sum()
    if not np.isfinite(total) or err.max() <= PRIORITY_FLOOR * (1.0 + np.abs(q).max()):
        return uniform(*q.shape)
    return err / total


def entropy(mu):
    mu = np.asarray(mu).ravel()
    nz = mu[mu > 0]
    return float(-(nz * np.log(nz)).sum())


def normalized_entropy(mu, num_states=None, num_actions=None):
    mu = np.asarray(mu)
    n = mu.size if num_states is None else num_states * num_actions
    if n <= 1:
        return 0.0
    return entropy(mu) / np.log(n)


def tv_distance(mu1, mu2):
    return 0.5 * float(np.abs(np.asarray(mu1) - np.asarray(mu2)).sum())


def expected_sq_error(q, tq, mu):
    d = np.asarray(q) - np.asarray(tq)
    return float((np.asarray(mu) * d * d).sum())


def loss_shift(q, tq, mu_new, mu_old):
    """Change in expected squared Bellman error when moving from ``mu_old`` to ``mu_new``."""
    return expected_sq_error(q, tq, mu_new) - expected_sq_error(q, tq, mu_old)
