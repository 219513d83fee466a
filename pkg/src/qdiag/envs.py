"""Builders for the eight tabular benchmark domains.

Every builder is a pure function of an :class:`EnvSpec`.  Randomness comes from
numpy's PCG64 generator seeded through ``SeedSequence`` with a fixed spawn key
layout, so identical specs give bitwise-identical MDPs on every platform::

    SeedSequence([seed, 0, attempt])   layout draws (walls, graph edges, goal)
    SeedSequence([seed, 1])            random observation vectors
"""
import difflib
import math
import re
from collections import deque
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from qdiag.errors import ConfigurationError
from qdiag.mdp import TabularMDP

DEFAULT_DISCOUNT = 0.95
MAX_ATTEMPTS = 100

SUITE_NAMES = (
    "gridworld-16-onehot",
    "gridworld-16-random",
    "gridworld-64-xy",
    "gridworld-64-random",
    "cliffwalk-16",
    "pendulum-32",
    "mountaincar-32",
    "sparsegraph-256",
)

_OBS_KINDS = {"onehot", "xy", "random"}


@dataclass(frozen=True)
class EnvSpec:
    name: str
    size: int
    observation_kind: str = "onehot"
    seed: int = 0
    discount: float = DEFAULT_DISCOUNT
    wall_density: float = 0.2

    def __post_init__(self):
        if self.size <= 0:
            raise ConfigurationError("size must be positive")
        if self.observation_kind not in _OBS_KINDS:
            raise ConfigurationError(f"unknown observation kind {self.observation_kind!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @property
    def canonical_name(self):
        if self.name == "gridworld":
            return f"gridworld-{self.size}-{self.observation_kind}"
        return f"{self.name}-{self.size}"


@dataclass(frozen=True)
class ObservationMatrix:
    features: np.ndarray

    def __post_init__(self):
        f = np.array(self.features, dtype=np.float64)
        if f.ndim != 2 or not np.all(np.isfinite(f)):
            raise ConfigurationError("observations must be a finite S x D matrix")
        f.setflags(write=False)
        object.__setattr__(self, "features", f)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def num_states(self):
        return self.features.shape[0]


def _layout_rng(seed, attempt):
    return np.random.default_rng(np.random.SeedSequence([seed, 0, attempt]))


def _obs_rng(seed):
    return np.random.default_rng(np.random.SeedSequence([seed, 1]))


def _deterministic_kernel(next_state):
    """Sparse kernel from an ``S x A`` array of deterministic successors."""
    S, A = next_state.shape
    rows = np.arange(S * A)
    return sp.csr_matrix((np.ones(S * A), (rows, next_state.ravel())), shape=(S * A, S))


def _reachable(successors, start):
    """States reachable from ``start`` given a list of successor sets."""
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in successors[s]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


# -- gridworld ---------------------------------------------------------------

_MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))  # up, right, down, left
SLIP_PROB = 0.05


def build_gridworld(spec):
    """N x N maze with random walls and slippery moves; the reward is shaped by distance.

    Start is the top-left cell, goal the bottom-right.  A commanded move succeeds
    with probability 0.95; otherwise one of the three other directions is taken
    uniformly.  Walls and the border block movement.  The reward of a state is
    ``1 - d(s, goal) / d(start, goal)`` clipped to [0, 1] (Manhattan distance).
    """
    N = spec.size
    if N < 2:
        raise ConfigurationError("gridworld side must be at least 2")
    S = N * N
    start, goal = 0, S - 1
    for attempt in range(MAX_ATTEMPTS):
        rng = _layout_rng(spec.seed, attempt)
        walls = rng.random(S) < spec.wall_density
        walls[[start, goal]] = False
        nxt = _grid_successors(N, walls)
        free_succ = [set(nxt[s]) for s in range(S)]
        if goal in _reachable(free_succ, start):
            break
    else:
        raise ConfigurationError(f"no connected wall layout after {MAX_ATTEMPTS} attempts")

    rows, cols, vals = [], [], []
    for s in range(S):
        for a in range(4):
            probs = {}
            for d in range(4):
                p = 1.0 - SLIP_PROB if d == a else SLIP_PROB / 3
                t = nxt[s][d]
                probs[t] = probs.get(t, 0.0) + p
            for t, p in sorted(probs.items()):
                rows.append(s * 4 + a)
                cols.append(t)
                vals.append(p)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(S * 4, S))

    ii, jj = np.divmod(np.arange(S), N)
    dist = np.abs(ii - (N - 1)) + np.abs(jj - (N - 1))
    reward = np.clip(1.0 - dist / dist[start], 0.0, 1.0)
    R = np.repeat(reward[:, None], 4, axis=1)
    rho0 = np.zeros(S)
    rho0[start] = 1.0
    mdp = TabularMDP(P, R, spec.discount, rho0)

    if spec.observation_kind == "onehot":
        obs = np.eye(S)
    elif spec.observation_kind == "xy":
        obs = np.zeros((S, 2 * N))
        obs[np.arange(S), ii] = 1.0
        obs[np.arange(S), N + jj] = 1.0
    else:
        obs = _obs_rng(spec.seed).standard_normal((S, N))
    return mdp, ObservationMatrix(obs)


def _grid_successors(N, walls):
    """``nxt[s][d]``: cell reached from s by moving in direction d."""
    S = N * N
    nxt = []
    for s in range(S):
        i, j = divmod(s, N)
        row = []
        for di, dj in _MOVES:
            ti, tj = i + di, j + dj
            t = ti * N + tj
            if walls[s] or not (0 <= ti < N and 0 <= tj < N) or walls[t]:
                t = s
            row.append(t)
        nxt.append(row)
    return nxt


# -- cliffwalk ---------------------------------------------------------------

CLIFF_OBS_DIM = 16


def build_cliffwalk(spec):
    """Chain of L states: action 0 advances, action 1 returns to the start.

    Advancing from the final state self-loops and pays 1; every other transition
    pays 0, so the optimal return from the start is ``gamma^(L-1) / (1 - gamma)``.
    """
    L = spec.size
    if L < 2:
        raise ConfigurationError("cliffwalk needs at least 2 states")
    nxt = np.zeros((L, 2), dtype=np.int64)
    nxt[:, 0] = np.minimum(np.arange(L) + 1, L - 1)
    R = np.zeros((L, 2))
    R[L - 1, 0] = 1.0
    rho0 = np.zeros(L)
    rho0[0] = 1.0
    mdp = TabularMDP(_deterministic_kernel(nxt), R, spec.discount, rho0)
    obs = _obs_rng(spec.seed).standard_normal((L, CLIFF_OBS_DIM))
    return mdp, ObservationMatrix(obs)


# -- discretized classic control --------------------------------------------

def _nearest_bin(x, lo, width, bins):
    return np.clip(np.floor((x - lo) / width), 0, bins - 1).astype(np.int64)


def _check_bins(B):
    if B < 4:
        raise ConfigurationError("at least 4 bins per dimension are required")


PENDULUM = dict(max_speed=8.0, max_torque=2.0, dt=0.05, g=10.0, m=1.0, l=1.0, actions=5)


def build_pendulum(spec):
    """Swing-up pendulum on a B x B (angle, angular velocity) grid.

    Angle 0 is upright.  One Euler step of the Gym pendulum dynamics is applied
    to every cell center and the result is snapped to the containing cell.  The
    reward ``(1 + cos theta) / 2`` is maximal upright.  The pendulum starts
    hanging at rest.
    """
    B = spec.size
    _check_bins(B)
    c = PENDULUM
    th_w = 2 * math.pi / B
    v_w = 2 * c["max_speed"] / B
    th = -math.pi + (np.arange(B) + 0.5) * th_w
    v = -c["max_speed"] + (np.arange(B) + 0.5) * v_w
    TH, V = np.meshgrid(th, v, indexing="ij")
    TH, V = TH.ravel(), V.ravel()
    torques = np.linspace(-c["max_torque"], c["max_torque"], c["actions"])
    S = B * B
    nxt = np.empty((S, len(torques)), dtype=np.int64)
    for a, u in enumerate(torques):
        acc = 3 * c["g"] / (2 * c["l"]) * np.sin(TH) + 3.0 / (c["m"] * c["l"] ** 2) * u
        nv = np.clip(V + acc * c["dt"], -c["max_speed"], c["max_speed"])
        nth = np.mod(TH + nv * c["dt"] + math.pi, 2 * math.pi) - math.pi
        ti = _nearest_bin(nth, -math.pi, th_w, B)
        vi = _nearest_bin(nv, -c["max_speed"], v_w, B)
        nxt[:, a] = ti * B + vi
    R = np.repeat(((1.0 + np.cos(TH)) / 2.0)[:, None], len(torques), axis=1)
    rho0 = np.zeros(S)
    rho0[_nearest_bin(math.pi - 1e-12, -math.pi, th_w, B) * B
         + _nearest_bin(0.0, -c["max_speed"], v_w, B)] = 1.0
    mdp = TabularMDP(_deterministic_kernel(nxt), R, spec.discount, rho0)
    obs = np.stack([np.sin(TH), np.cos(TH), V], axis=1)
    return mdp, ObservationMatrix(obs)


MOUNTAINCAR = dict(min_pos=-1.2, max_pos=0.6, max_speed=0.07, goal=0.5,
                   force=0.001, gravity=0.0025, substeps=4)


def build_mountaincar(spec):
    """Mountain car on a B x B (position, velocity) grid with 3 push actions.

    Each MDP step applies the Gym update ``substeps`` times to the cell center
    before snapping to a cell; with a single update the car cannot leave a
    32-bin cell.  Goal cells (position >= 0.5) are absorbing and pay 1 per step.
    """
    B = spec.size
    _check_bins(B)
    c = MOUNTAINCAR
    p_w = (c["max_pos"] - c["min_pos"]) / B
    v_w = 2 * c["max_speed"] / B
    p = c["min_pos"] + (np.arange(B) + 0.5) * p_w
    v = -c["max_speed"] + (np.arange(B) + 0.5) * v_w
    P0, V0 = np.meshgrid(p, v, indexing="ij")
    P0, V0 = P0.ravel(), V0.ravel()
    S = B * B
    at_goal = P0 >= c["goal"]
    nxt = np.empty((S, 3), dtype=np.int64)
    for a in range(3):
        pos, vel = P0.copy(), V0.copy()
        for _ in range(c["substeps"]):
            vel = vel + (a - 1) * c["force"] + np.cos(3 * pos) * (-c["gravity"])
            vel = np.clip(vel, -c["max_speed"], c["max_speed"])
            pos = np.clip(pos + vel, c["min_pos"], c["max_pos"])
            vel = np.where((pos <= c["min_pos"]) & (vel < 0), 0.0, vel)
        cell = _nearest_bin(pos, c["min_pos"], p_w, B) * B + _nearest_bin(vel, -c["max_speed"], v_w, B)
        nxt[:, a] = np.where(at_goal, np.arange(S), cell)
    R = np.repeat(at_goal.astype(np.float64)[:, None], 3, axis=1)
    start_p = np.flatnonzero((p >= -0.6) & (p <= -0.4))
    start_v = _nearest_bin(0.0, -c["max_speed"], v_w, B)
    rho0 = np.zeros(S)
    rho0[start_p * B + start_v] = 1.0 / len(start_p)
    mdp = TabularMDP(_deterministic_kernel(nxt), R, spec.discount, rho0)
    obs = np.stack([P0, V0], axis=1)
    return mdp, ObservationMatrix(obs)


# -- sparse graph --------------------------------------------------------------

def build_sparsegraph(spec):
    """Random directed graph with two outgoing edges (one per action) per node.

    A random non-start node is the goal: it absorbs and pays 1 per step.  The
    layout is redrawn until the goal is reachable from state 0.
    """
    S = spec.size
    if S < 2:
        raise ConfigurationError("sparsegraph needs at least 2 states")
    for attempt in range(MAX_ATTEMPTS):
        rng = _layout_rng(spec.seed, attempt)
        nxt = rng.integers(0, S, size=(S, 2))
        goal = int(rng.integers(1, S))
        nxt[goal] = goal
        if goal in _reachable([set(row) for row in nxt.tolist()], 0):
            break
    else:
        raise ConfigurationError(f"goal unreachable after {MAX_ATTEMPTS} attempts")
    R = np.zeros((S, 2))
    R[goal] = 1.0
    rho0 = np.zeros(S)
    rho0[0] = 1.0
    mdp = TabularMDP(_deterministic_kernel(nxt), R, spec.discount, rho0)
    return mdp, ObservationMatrix(np.eye(S))


BUILDERS = {
    "gridworld": build_gridworld,
    "cliffwalk": build_cliffwalk,
    "pendulum": build_pendulum,
    "mountaincar": build_mountaincar,
    "sparsegraph": build_sparsegraph,
}

_NAME_RE = re.compile(r"^(gridworld)-(\d+)-(onehot|xy|random)$|^(cliffwalk|pendulum|mountaincar|sparsegraph)-(\d+)$")


def parse_env_name(name, seed=0, discount=DEFAULT_DISCOUNT):
    """Turn a canonical name such as ``gridworld-16-random`` into an EnvSpec."""
    m = _NAME_RE.match(name)
    if m is None:
        hint = difflib.get_close_matches(name, SUITE_NAMES, n=3)
        msg = f"unknown environment {name!r}"
        if hint:
            msg += f"; did you mean {', '.join(hint)}?"
        raise ConfigurationError(msg)
    if m.group(1):
        return EnvSpec("gridworld", int(m.group(2)), m.group(3), seed, discount)
    kind = m.group(4)
    obs = "onehot" if kind == "sparsegraph" else "random"
    return EnvSpec(kind, int(m.group(5)), obs, seed, discount)


def build(spec):
    return BUILDERS[spec.name](spec)


def make_env(name, seed=0, discount=DEFAULT_DISCOUNT):
    spec = parse_env_name(name, seed, discount)
    mdp, obs = build(spec)
    return spec, mdp, obs


def default_suite(seed=0, discount=DEFAULT_DISCOUNT):
    """The fixed eight-domain benchmark as ``(spec, mdp, obs)`` triples."""
    return [make_env(name, seed, discount) for name in SUITE_NAMES]


def with_seed(spec, seed):
    return replace(spec, seed=seed)
