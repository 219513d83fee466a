"""Exact tabular MDPs and the oracle computations built on them.

Q-tables, policies and state-action distributions are plain ``(S, A)`` float
arrays.  Transition kernels are stored as a sparse ``(S*A, S)`` matrix whose row
``s*A + a`` holds ``T(.|s, a)``; every benchmark domain has only a handful of
successors per pair, and the 4096-state gridworlds would not fit in memory as a
dense ``S x A x S`` tensor.
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from qdiag.errors import ConfigurationError, DivergenceError, NormalizationError

_PROB_TOL = 1e-9


def _as_transition_matrix(transitions, num_actions=None):
    if sp.issparse(transitions):
        return sp.csr_matrix(transitions, dtype=np.float64)
    t = np.asarray(transitions, dtype=np.float64)
    if t.ndim != 3 or t.shape[0] != t.shape[2]:
        raise ConfigurationError(f"dense transitions must be S x A x S, got {t.shape}")
    return sp.csr_matrix(t.reshape(-1, t.shape[2]))


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """A finite discounted MDP with known dynamics.

    ``transitions`` may be given as a dense ``S x A x S`` array or as a sparse
    ``(S*A) x S`` matrix; it is always stored in the sparse form.
    """

    transitions: sp.csr_matrix
    rewards: np.ndarray
    discount: float
    initial_dist: np.ndarray

    def __post_init__(self):
        rewards = np.array(self.rewards, dtype=np.float64)
        if rewards.ndim != 2:
            raise ConfigurationError("rewards must be an S x A matrix")
        S, A = rewards.shape
        P = _as_transition_matrix(self.transitions)
        P.sum_duplicates()
        P.sort_indices()
        if P.shape != (S * A, S):
            raise ConfigurationError(f"transitions shape {P.shape} does not match S={S}, A={A}")
        if P.nnz and P.data.min() < 0:
            raise ConfigurationError("transition probabilities must be non-negative")
        row_sums = np.asarray(P.sum(axis=1)).ravel()
        if np.abs(row_sums - 1.0).max() > _PROB_TOL:
            raise ConfigurationError("every transition row must sum to 1")
        if not np.all(np.isfinite(rewards)):
            raise ConfigurationError("rewards must be finite")
        if not 0.0 < self.discount < 1.0:
            raise ConfigurationError(f"discount must lie in (0, 1), got {self.discount}")
        rho0 = np.array(self.initial_dist, dtype=np.float64)
        if rho0.shape != (S,) or rho0.min() < 0 or abs(rho0.sum() - 1.0) > _PROB_TOL:
            raise ConfigurationError("initial_dist must be a probability vector of length S")
        rewards.setflags(write=False)
        rho0.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "initial_dist", rho0)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def num_states(self):
        return self.rewards.shape[0]

    @property
    def num_actions(self):
        return self.rewards.shape[1]

    def dense_transitions(self):
        """The kernel as a dense ``S x A x S`` array (only sensible for small S)."""
        S, A = self.rewards.shape
        return self.transitions.toarray().reshape(S, A, S)

    @cached_property
    def q_star(self):
        """Optimal Q-values, solved to a Bellman residual of 1e-10."""
        q = solve_optimal(self, 1e-10)
        q.setflags(write=False)
        return q

    @cached_property
    def expert_returns(self):
        """Returns of the greedy policy on Q*; the normalizer for every metric."""
        return policy_returns(self, greedy_policy(self.q_star, 0.0))

    @cached_property
    def _row_cdf(self):
        return np.cumsum(self.transitions.data)

    def sample_next_states(self, states, actions, rng):
        """Draw one successor for each ``(states[i], actions[i])`` pair."""
        P = self.transitions
        rows = np.asarray(states) * self.num_actions + np.asarray(actions)
        lo = P.indptr[rows]
        hi = P.indptr[rows + 1]
        cdf = self._row_cdf
        base = np.where(lo > 0, cdf[np.maximum(lo - 1, 0)], 0.0)
        u = rng.random(rows.shape)
        mass = cdf[hi - 1] - base
        pos = np.searchsorted(cdf, base + u * mass, side="right")
        pos = np.clip(pos, lo, hi - 1)
        return P.indices[pos]


def check_policy(probs, num_actions=None):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or (num_actions is not None and probs.shape[1] != num_actions):
        raise ConfigurationError("policy must be an S x A matrix")
    if probs.min() < 0 or np.abs(probs.sum(axis=1) - 1.0).max() > _PROB_TOL:
        raise ConfigurationError("policy rows must be probability vectors")
    return probs


def check_distribution(mu):
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim != 2 or mu.min() < 0 or abs(mu.sum() - 1.0) > _PROB_TOL:
        raise ConfigurationError("state-action distribution must be non-negative and sum to 1")
    return mu


def _check_finite(q):
    q = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise DivergenceError("Q-table contains non-finite entries")
    return q


def expected_next_value(mdp, v):
    """``E_{s'~T(.|s,a)}[v(s')]`` as an S x A matrix."""
    return (mdp.transitions @ v).reshape(mdp.num_states, mdp.num_actions)


def bellman_backup(mdp, q):
    """Apply the optimality backup ``R + gamma * E[max_a' q(s', a')]``."""
    q = _check_finite(q)
    return mdp.rewards + mdp.discount * expected_next_value(mdp, q.max(axis=1))


def alpha_smoothed_backup(mdp, q, alpha):
    """``alpha * T q + (1 - alpha) * q``; contracts at rate ``1 - alpha + alpha * gamma``."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    q = _check_finite(q)
    if alpha == 1.0:
        return bellman_backup(mdp, q)
    return alpha * bellman_backup(mdp, q) + (1.0 - alpha) * q


def value_iteration(mdp, tol):
    """Q-iteration from zero until ``||Q - TQ||_inf <= tol``.

    Returns ``(Q, sweeps)``.  Starting from zero, ``||Q_k - TQ_k|| <= gamma^k ||R||``,
    so the loop never exceeds ``ceil(log(tol (1-gamma) / ||R||) / log gamma) + 1`` sweeps.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    q = np.zeros_like(mdp.rewards)
    sweeps = 0
    while True:
        tq = bellman_backup(mdp, q)
        if np.abs(tq - q).max() <= tol:
            return q, sweeps
        q = tq
        sweeps += 1


def solve_optimal(mdp, tol=1e-10):
    return value_iteration(mdp, tol)[0]


def value_iteration_bound(mdp, tol):
    """Upper bound on the number of sweeps ``value_iteration`` may take."""
    rmax = np.abs(mdp.rewards).max()
    if rmax == 0:
        return 1
    g = mdp.discount
    return max(0, math.ceil(math.log(tol * (1 - g) / rmax) / math.log(g))) + 1


def greedy_policy(q, epsilon=0.0):
    """Epsilon-greedy policy on ``q``; ties go to the lowest action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigurationError("epsilon must lie in [0, 1]")
    q = _check_finite(q)
    S, A = q.shape
    probs = np.full((S, A), epsilon / A)
    probs[np.arange(S), q.argmax(axis=1)] += 1.0 - epsilon
    return probs


def uniform_policy(num_states, num_actions):
    return np.full((num_states, num_actions), 1.0 / num_actions)


def policy_matrix(mdp, policy):
    """State-to-state kernel ``P_pi`` under ``policy`` (sparse S x S)."""
    S, A = mdp.num_states, mdp.num_actions
    rows = np.repeat(np.arange(S), A)
    cols = np.arange(S * A)
    mix = sp.csr_matrix((np.asarray(policy).ravel(), (rows, cols)), shape=(S, S * A))
    return (mix @ mdp.transitions).tocsc()


class PolicyEvaluation:
    """One LU factorization of ``I - gamma P_pi`` shared by value and occupancy solves."""

    def __init__(self, mdp, policy):
        self.mdp = mdp
        self.policy = check_policy(policy, mdp.num_actions)
        S = mdp.num_states
        system = sp.identity(S, format="csc") - mdp.discount * policy_matrix(mdp, self.policy)
        self._lu = spla.splu(system.tocsc())

    def values(self):
        r_pi = (self.policy * self.mdp.rewards).sum(axis=1)
        return self._lu.solve(r_pi)

    def returns(self):
        return float(self.mdp.initial_dist @ self.values())

    def occupancy(self):
        d = (1.0 - self.mdp.discount) * self._lu.solve(self.mdp.initial_dist, trans="T")
        mu = np.clip(d, 0.0, None)[:, None] * self.policy
        return mu / mu.sum()


def policy_returns(mdp, policy):
    """Exact discounted return ``rho0^T V^pi`` via a direct sparse LU solve."""
    return PolicyEvaluation(mdp, policy).returns()


def occupancy(mdp, policy):
    """Normalized discounted state-action occupancy of ``policy``."""
    return PolicyEvaluation(mdp, policy).occupancy()


def normalize_by_expert(value, mdp):
    eta = mdp.expert_returns
    if eta == 0:
        raise NormalizationError("expert returns are zero; environment cannot be normalized")
    return value / eta
