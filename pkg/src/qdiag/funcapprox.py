"""Q-function approximators: an exact table and two-hidden-layer ReLU networks.

Forward and backward passes are written out by hand for the fixed topology
``x -> relu(x W1 + b1) -> relu(. W2 + b2) -> . Wout + bout``.  The second hidden
activation is the feature map used by adversarial feature matching.
"""
import io
import re
import struct
from dataclasses import dataclass, field

import numpy as np

from qdiag.errors import ConfigurationError, DivergenceError, UnsupportedOperationError

MLP_PARAMS = ("W1", "b1", "W2", "b2", "Wout", "bout")


@dataclass(frozen=True)
class ArchSpec:
    kind: str = "mlp"
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if self.kind not in ("tabular", "mlp"):
            raise ConfigurationError(f"unknown architecture kind {self.kind!r}")
        if self.kind == "mlp":
            hidden = tuple(int(h) for h in self.hidden)
            if len(hidden) != 2 or min(hidden) < 1:
                raise ConfigurationError("mlp needs two positive hidden sizes")
            object.__setattr__(self, "hidden", hidden)
        else:
            object.__setattr__(self, "hidden", ())

    @classmethod
    def parse(cls, text):
        """Accepts ``tabular``, ``64x64`` or ``(64, 64)``."""
        text = str(text).strip().lower()
        if text == "tabular":
            return cls("tabular")
        m = re.fullmatch(r"\(?\s*(\d+)\s*[x,]\s*(\d+)\s*\)?", text)
        if m is None:
            raise ConfigurationError(f"cannot parse architecture {text!r}")
        return cls("mlp", (int(m.group(1)), int(m.group(2))))

    @property
    def name(self):
        return "tabular" if self.kind == "tabular" else f"{self.hidden[0]}x{self.hidden[1]}"


TABULAR = ArchSpec("tabular")
SWEEP_ARCHS = (TABULAR, ArchSpec("mlp", (4, 4)), ArchSpec("mlp", (16, 16)),
               ArchSpec("mlp", (64, 64)), ArchSpec("mlp", (256, 256)))


class QNetwork:
    """Parameters of a Q-function.  ``params`` maps tensor names to arrays."""

    def __init__(self, arch, params, input_dim, num_actions):
        self.arch = arch
        self.params = params
        self.input_dim = input_dim
        self.num_actions = num_actions

    @property
    def is_tabular(self):
        return self.arch.kind == "tabular"

    def copy(self):
        return QNetwork(self.arch, {k: v.copy() for k, v in self.params.items()},
                        self.input_dim, self.num_actions)

    def num_parameters(self):
        return sum(v.size for v in self.params.values())

    def __repr__(self):
        return f"QNetwork({self.arch.name}, in={self.input_dim}, out={self.num_actions})"


def init_network(arch, input_dim, num_actions, rng, num_states=None):
    """Fan-in scaled uniform initialization; tables start at zero."""
    if arch.kind == "tabular":
        if num_states is None:
            raise ConfigurationError("tabular networks need num_states")
        return QNetwork(arch, {"table": np.zeros((num_states, num_actions))}, num_states, num_actions)
    n1, n2 = arch.hidden
    params = {}
    for (w, b), (fan_in, fan_out) in zip((("W1", "b1"), ("W2", "b2"), ("Wout", "bout")),
                                         ((input_dim, n1), (n1, n2), (n2, num_actions))):
        bound = 1.0 / np.sqrt(fan_in)
        params[w] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[b] = rng.uniform(-bound, bound, size=fan_out)
    return QNetwork(arch, params, input_dim, num_actions)


def _check_obs(net, X):
    if X.shape[1] != net.input_dim:
        raise ConfigurationError(f"observation dim {X.shape[1]} != network input dim {net.input_dim}")


def _features_of(obs):
    return obs.features if hasattr(obs, "features") else np.asarray(obs, dtype=np.float64)


def _mlp_forward(p, X):
    z1 = X @ p["W1"] + p["b1"]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ p["W2"] + p["b2"]
    h2 = np.maximum(z2, 0.0)
    return h1, h2, h2 @ p["Wout"] + p["bout"]


def _mlp_backward(p, X, h1, h2, dq):
    grads = {"Wout": h2.T @ dq, "bout": dq.sum(axis=0)}
    dz2 = (dq @ p["Wout"].T) * (h2 > 0)
    grads["W2"] = h1.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ p["W2"].T) * (h1 > 0)
    grads["W1"] = X.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return grads


def forward_q(net, obs):
    """Q-values for every state (row of ``obs``) as an S x A matrix."""
    if net.is_tabular:
        return net.params["table"].copy()
    X = _features_of(obs)
    _check_obs(net, X)
    return _mlp_forward(net.params, X)[2]


def features(net, obs):
    """Second hidden-layer activations, an S x n2 matrix."""
    if net.is_tabular:
        raise UnsupportedOperationError("tabular networks have no feature layer")
    X = _features_of(obs)
    _check_obs(net, X)
    return _mlp_forward(net.params, X)[1]


def loss_and_grad(net, obs, targets, mu):
    """Weighted squared error ``sum mu (Q - y)^2`` and its gradient.

    Only states with positive weight contribute, so the forward pass is
    restricted to them.
    """
    mu = np.asarray(mu)
    if net.is_tabular:
        diff = net.params["table"] - targets
        return float((mu * diff * diff).sum()), {"table": 2.0 * mu * diff}
    X = _features_of(obs)
    _check_obs(net, X)
    rows = np.flatnonzero(mu.sum(axis=1) > 0)
    Xr = X[rows]
    h1, h2, q = _mlp_forward(net.params, Xr)
    diff = q - targets[rows]
    w = mu[rows]
    loss = float((w * diff * diff).sum())
    return loss, _mlp_backward(net.params, Xr, h1, h2, 2.0 * w * diff)


def sample_loss_and_grad(net, obs, states, actions, targets, weights):
    """Loss ``sum_i w_i (Q(s_i, a_i) - y_i)^2`` over a batch of pairs."""
    if net.is_tabular:
        diff = net.params["table"][states, actions] - targets
        g = np.zeros_like(net.params["table"])
        np.add.at(g, (states, actions), 2.0 * weights * diff)
        return float((weights * diff * diff).sum()), {"table": g}
    X = _features_of(obs)[states]
    h1, h2, q = _mlp_forward(net.params, X)
    idx = np.arange(len(states))
    diff = q[idx, actions] - targets
    dq = np.zeros_like(q)
    dq[idx, actions] = 2.0 * weights * diff
    return float((weights * diff * diff).sum()), _mlp_backward(net.params, X, h1, h2, dq)


class Adam:
    """Adaptive moment estimation over a dict of parameter arrays (updated in place)."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent settings for one projection step.

    ``batch_size`` 0 means full batch.  The fit stops after ``max_steps`` or when
    the loss decreased by less than ``tol`` (relative) over one snapshot window;
    ``tol=0`` always runs ``max_steps``.
    """

    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    max_steps: int = 500
    batch_size: int = 0
    tol: float = 1e-4
    snapshot_every: int = 50

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError("step size must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be at least 1")
        if self.batch_size < 0 or self.snapshot_every < 1 or self.tol < 0:
            raise ConfigurationError("invalid fit configuration")


@dataclass
class Snapshot:
    step: int
    net: QNetwork
    loss: float = field(default=float("nan"))


def _fit_loop(net, cfg, loss_fn, iteration=None):
    net = net.copy()
    opt = Adam(net.params, cfg.lr, cfg.betas)
    snapshots = [Snapshot(0, net.copy())]
    window_start = None
    for step in range(1, cfg.max_steps + 1):
        loss, grads = loss_fn(net, step)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at fit step {step}", iteration)
        if step == 1:
            snapshots[0].loss = loss
            window_start = loss
        opt.step(net.params, grads)
        if step % cfg.snapshot_every == 0 or step == cfg.max_steps:
            snapshots.append(Snapshot(step, net.copy(), loss))
            if cfg.tol > 0 and step % cfg.snapshot_every == 0:
                if window_start - loss <= cfg.tol * window_start:
                    break
                window_start = loss
    return net, snapshots


def fit_weighted_projection(net, obs, targets, mu, cfg, rng=None, iteration=None):
    """Project ``targets`` onto the network class under the weighting ``mu``.

    Returns the fitted copy and the list of intermediate snapshots (the first is
    the starting point).  Tabular networks are set to the exact minimizer: targets
    wherever ``mu > 0``, untouched elsewhere.  With ``cfg.batch_size > 0`` each
    step uses pairs drawn from ``mu`` with equal weights.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if not np.all(np.isfinite(targets)):
        raise DivergenceError("non-finite projection targets", iteration)
    mu = np.asarray(mu, dtype=np.float64)
    if net.is_tabular:
        out = net.copy()
        mask = mu > 0
        out.params["table"][mask] = targets[mask]
        return out, [Snapshot(0, net.copy()), Snapshot(1, out.copy(), 0.0)]
    if cfg.batch_size == 0:
        return _fit_loop(net, cfg, lambda n, _: loss_and_grad(n, obs, targets, mu), iteration)
    if rng is None:
        raise ConfigurationError("minibatch fitting needs an rng")
    S, A = mu.shape
    flat = mu.ravel()
    w = np.full(cfg.batch_size, 1.0 / cfg.batch_size)

    def minibatch(n, _):
        idx = rng.choice(S * A, size=cfg.batch_size, p=flat)
        s, a = np.divmod(idx, A)
        return sample_loss_and_grad(n, obs, s, a, targets[s, a], w)

    return _fit_loop(net, cfg, minibatch, iteration)


def fit_samples(net, obs, states, actions, targets, cfg, weights=None, rng=None, iteration=None):
    """Fit to a finite batch of ``(s, a, y)`` triples (empirical projection).

    ``weights`` defaults to ``1/M``.  Tabular networks take the weighted mean of the
    targets for every visited pair, which is the exact empirical minimizer.
    """
    states = np.asarray(states)
    actions = np.asarray(actions)
    targets = np.asarray(targets, dtype=np.float64)
    M = len(states)
    if not np.all(np.isfinite(targets)):
        raise DivergenceError("non-finite projection targets", iteration)
    if weights is None:
        weights = np.full(M, 1.0 / M)
    if net.is_tabular:
        out = net.copy()
        table = out.params["table"]
        num = np.zeros_like(table)
        den = np.zeros_like(table)
        np.add.at(num, (states, actions), weights * targets)
        np.add.at(den, (states, actions), weights)
        mask = den > 0
        table[mask] = num[mask] / den[mask]
        return out, [Snapshot(0, net.copy()), Snapshot(1, out.copy(), 0.0)]
    if cfg.batch_size == 0 or cfg.batch_size >= M:
        return _fit_loop(net, cfg, lambda n, _: sample_loss_and_grad(
            n, obs, states, actions, targets, weights), iteration)
    if rng is None:
        raise ConfigurationError("minibatch fitting needs an rng")
    scale = M / cfg.batch_size

    def minibatch(n, _):
        idx = rng.choice(M, size=cfg.batch_size, replace=False)
        return sample_loss_and_grad(n, obs, states[idx], actions[idx], targets[idx], weights[idx] * scale)

    return _fit_loop(net, cfg, minibatch, iteration)


# -- persistence ------------------------------------------------------------

MAGIC = b"QNET1"


def save_network(net, f):
    """Write ``net`` as ``QNET1`` + uint32 header + row-major little-endian float64 tensors.

    Header: kind (0 tabular, 1 mlp), then ``S, A`` for tables or ``D, n1, n2, A``.
    """
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f, "wb") as fh:
            return save_network(net, fh)
    f.write(MAGIC)
    if net.is_tabular:
        S, A = net.params["table"].shape
        f.write(struct.pack("<3I", 0, S, A))
        names = ("table",)
    else:
        n1, n2 = net.arch.hidden
        f.write(struct.pack("<5I", 1, net.input_dim, n1, n2, net.num_actions))
        names = MLP_PARAMS
    for k in names:
        f.write(np.ascontiguousarray(net.params[k], dtype="<f8").tobytes())


def load_network(f):
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f, "rb") as fh:
            return load_network(fh)
    if f.read(len(MAGIC)) != MAGIC:
        raise ConfigurationError("not a QNET1 file")
    (kind,) = struct.unpack("<I", f.read(4))

    def tensor(*shape):
        n = int(np.prod(shape))
        data = f.read(8 * n)
        if len(data) != 8 * n:
            raise ConfigurationError("truncated QNET1 file")
        return np.frombuffer(data, dtype="<f8").reshape(shape).astype(np.float64)

    if kind == 0:
        S, A = struct.unpack("<2I", f.read(8))
        return QNetwork(TABULAR, {"table": tensor(S, A)}, S, A)
    if kind != 1:
        raise ConfigurationError(f"unknown QNET1 kind {kind}")
    D, n1, n2, A = struct.unpack("<4I", f.read(16))
    shapes = {"W1": (D, n1), "b1": (n1,), "W2": (n1, n2), "b2": (n2,), "Wout": (n2, A), "bout": (A,)}
    params = {k: tensor(*shapes[k]) for k in MLP_PARAMS}
    return QNetwork(ArchSpec("mlp", (n1, n2)), params, D, A)


def network_bytes(net):
    buf = io.BytesIO()
    save_network(net, buf)
    return buf.getvalue()
