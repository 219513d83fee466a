import numpy as np
import pytest

from qdiag.mdp import TabularMDP


def random_mdp(rng, num_states=8, num_actions=3, discount=0.9, branching=None):
    """Dense random MDP; ``branching`` limits successors per pair."""
    S, A = num_states, num_actions
    T = rng.random((S, A, S))
    if branching is not None:
        for s in range(S):
            for a in range(A):
                keep = rng.choice(S, size=branching, replace=False)
                mask = np.zeros(S, bool)
                mask[keep] = True
                T[s, a, ~mask] = 0.0
    T /= T.sum(axis=2, keepdims=True)
    R = rng.normal(size=(S, A))
    rho0 = rng.random(S)
    return TabularMDP(T, R, discount, rho0 / rho0.sum())


def chain_mdp(discount=0.9):
    """Two states, two actions: state 1 absorbs and pays 1; action 0 advances."""
    T = np.zeros((2, 2, 2))
    T[0, 0, 1] = 1.0   # advance
    T[0, 1, 0] = 1.0   # stay
    T[1, :, 1] = 1.0
    R = np.array([[0.0, 0.0], [1.0, 1.0]])
    return TabularMDP(T, R, discount, np.array([1.0, 0.0]))


def single_state_mdp(reward=1.0, discount=0.5, num_actions=1):
    T = np.ones((1, num_actions, 1))
    return TabularMDP(T, np.full((1, num_actions), reward), discount, np.array([1.0]))


# -- independent Monte-Carlo oracles ----------------------------------------------

def _step(T, s, a, rng):
    cdf = np.cumsum(T[s, a], axis=1)
    u = rng.random(len(s))[:, None]
    return np.minimum((u > cdf).sum(axis=1), T.shape[2] - 1)


def mc_returns(mdp, policy, n, horizon, rng):
    T = mdp.dense_transitions()
    S, A = mdp.rewards.shape
    s = rng.choice(S, size=n, p=mdp.initial_dist)
    total = np.zeros(n)
    for t in range(horizon):
        a = (rng.random(n)[:, None] > np.cumsum(policy[s], axis=1)).sum(axis=1)
        a = np.minimum(a, A - 1)
        total += mdp.discount ** t * mdp.rewards[s, a]
        s = _step(T, s, a, rng)
    return total


def mc_occupancy(mdp, policy, n, horizon, rng):
    T = mdp.dense_transitions()
    S, A = mdp.rewards.shape
    g = mdp.discount
    s = rng.choice(S, size=n, p=mdp.initial_dist)
    counts = np.zeros((S, A))
    for t in range(horizon):
        a = np.minimum((rng.random(n)[:, None] > np.cumsum(policy[s], axis=1)).sum(axis=1), A - 1)
        np.add.at(counts, (s, a), (1 - g) * g ** t)
        s = _step(T, s, a, rng)
    return counts / counts.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ------------------------------------------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        detail = dict(item.user_properties).get("detail", "")
        prev = _ACCEPTANCE.get(number)
        if prev is None or failed:
            _ACCEPTANCE[number] = ("FAIL" if failed else "PASS", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"[{status}] criterion {number:2d}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
