"""Adversarial feature matching (AFM).

An adversary picks the weighting distribution to maximize the weighted squared
Bellman error, subject to the expected (standardized) penultimate-layer features
under that distribution staying within ``epsilon`` of their reference mean in
every dimension.  The constrained inner problem is solved with alternating
primal steps on the adversary and projected dual ascent on one multiplier per
feature dimension.  Q-network features are treated as constants throughout.

Two adversaries are provided:

* ``exact_logits``: a softmax over a full S x A logit table (exact FQI).
* ``replay_network``: a network with the Q-network's shape that scores buffer
  samples; scores are exponentiated and self-normalized over the batch, with a
  second-order Renyi penalty and WGAN-style parameter clipping.
"""
from dataclasses import dataclass

import numpy as np

from qdiag.errors import ConfigurationError, UnsupportedOperationError
from qdiag.funcapprox import Adam, _mlp_backward, _mlp_forward, features, forward_q, init_network


@dataclass(frozen=True)
class AFMConfig:
    epsilon: float = 0.05
    renyi_coeff: float = 0.1
    renyi_const: float = 1.0
    delta_conf: float = 0.1
    inner_steps: int = 10
    lr: float = 1e-4
    dual_lr: float = 0.1
    clip: float = 0.1
    batch_size: int = 128
    optimistic: bool = False
    ema_decay: float = 0.0

    def __post_init__(self):
        if not 1 <= self.inner_steps <= 10:
            raise ConfigurationError("inner_steps must lie in [1, 10]")
        if self.epsilon < 0 or self.renyi_coeff < 0 or self.lr <= 0 or self.dual_lr < 0:
            raise ConfigurationError("invalid AFM configuration")
        if not 0 < self.delta_conf <= 1:
            raise ConfigurationError("delta_conf must lie in (0, 1]")


@dataclass
class AdversaryState:
    mode: str
    cfg: AFMConfig
    lam: np.ndarray
    logits: np.ndarray = None
    net: object = None
    opt: object = None
    prev_grad: dict = None
    ema: np.ndarray = None
    resets: int = 0
    steps: int = 0
    last_residual: np.ndarray = None
    avg_dist: np.ndarray = None
    avg_count: int = 0


@dataclass
class AFMBatchWeights:
    weights: np.ndarray
    renyi: float
    residual: np.ndarray


def standardize(phi, weights=None):
    """Center and scale feature columns; constant columns are only centered.

    Returns ``(standardized, reference_mean)`` where the reference mean is the
    (weighted) mean of the standardized columns, i.e. zero.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if weights is None:
        mean = phi.mean(axis=0)
        var = ((phi - mean) ** 2).mean(axis=0)
    else:
        mean = weights @ phi
        var = weights @ (phi - mean) ** 2
    std = np.sqrt(var)
    std[std < 1e-12] = 1.0
    z = (phi - mean) / std
    return z, np.zeros(phi.shape[1])


def softmax(x):
    z = np.exp(x - x.max())
    return z / z.sum()


# -- exact mode ---------------------------------------------------------------

def new_exact_adversary(num_states, num_actions, feature_dim, cfg=AFMConfig()):
    logits = np.zeros((num_states, num_actions))
    return AdversaryState("exact_logits", cfg, np.zeros(feature_dim), logits=logits,
                          opt=Adam({"logits": logits}, cfg.lr))


def afm_exact_distribution(adv, averaged=False):
    """The adversary's weighting over all pairs.

    The last iterate of descent-ascent on this game orbits the saddle point;
    ``averaged=True`` returns the running mean of the iterates since the last
    reset, which is the point that satisfies the feature constraint.
    """
    if adv.mode != "exact_logits":
        raise ConfigurationError("adversary is not in exact mode")
    if averaged and adv.avg_dist is not None:
        return adv.avg_dist.copy()
    logits = adv.ema if adv.ema is not None else adv.logits
    return softmax(logits.ravel()).reshape(logits.shape)


def exact_residual(p, phi, phi_ref):
    return p.sum(axis=1) @ phi - phi_ref


def exact_step(adv, err_sq, phi, phi_ref):
    """One primal step on the logits followed by one dual step on ``lam``.

    ``err_sq`` is the S x A field ``(Q - y)^2``; ``phi`` the S x d features.
    """
    cfg = adv.cfg
    p = softmax(adv.logits.ravel()).reshape(adv.logits.shape)
    r = exact_residual(p, phi, phi_ref)
    g = -err_sq + (phi @ (adv.lam * np.sign(r)))[:, None]
    grad = p * (g - (p * g).sum())
    if not np.all(np.isfinite(grad)):
        _reset_exact(adv)
        return adv
    if cfg.optimistic:
        prev = adv.prev_grad["logits"] if adv.prev_grad else grad
        adv.prev_grad = {"logits": grad}
        grad = 2 * grad - prev
    adv.opt.step({"logits": adv.logits}, {"logits": grad})
    if not np.all(np.isfinite(adv.logits)):
        _reset_exact(adv)
        return adv
    if cfg.ema_decay > 0:
        adv.ema = adv.logits.copy() if adv.ema is None else (
            cfg.ema_decay * adv.ema + (1 - cfg.ema_decay) * adv.logits)
    p = softmax(adv.logits.ravel()).reshape(adv.logits.shape)
    r = exact_residual(p, phi, phi_ref)
    adv.lam = np.maximum(0.0, adv.lam + cfg.dual_lr * (np.abs(r) - cfg.epsilon))
    adv.last_residual = r
    adv.steps += 1
    if adv.avg_dist is None:
        adv.avg_dist = p.copy()
        adv.avg_count = 1
    else:
        adv.avg_count += 1
        adv.avg_dist += (p - adv.avg_dist) / adv.avg_count
    return adv


def _reset_exact(adv):
    adv.logits[...] = 0.0
    adv.opt = Adam({"logits": adv.logits}, adv.cfg.lr)
    adv.ema = None
    adv.avg_dist = None
    adv.prev_grad = None
    adv.resets += 1


def afm_exact_inner_step(adv, q, targets, obs, phi_ref=None):
    """One inner step for network ``q`` fitted towards ``targets`` on ``obs``."""
    if q.is_tabular:
        raise UnsupportedOperationError("AFM needs a network with a feature layer")
    phi, ref = standardize(features(q, obs))
    if phi_ref is not None:
        ref = phi_ref
    err = (forward_q(q, obs) - targets) ** 2
    return exact_step(adv, err, phi, ref)


# -- replay mode --------------------------------------------------------------

def _clip_params(net, c):
    for v in net.params.values():
        np.clip(v, -c, c, out=v)


def new_replay_adversary(arch, input_dim, num_actions, feature_dim, rng,
                         cfg=AFMConfig(), num_states=None):
    net = init_network(arch, input_dim, num_actions, rng, num_states=num_states)
    _clip_params(net, cfg.clip)
    return AdversaryState("replay_network", cfg, np.zeros(feature_dim), net=net,
                          opt=Adam(net.params, cfg.lr))


def _scores(adv, X, states, actions):
    net = adv.net
    idx = np.arange(len(states))
    if net.is_tabular:
        return net.params["table"][states, actions], None
    h1, h2, out = _mlp_forward(net.params, X[states])
    return out[idx, actions], (h1, h2, out)


def renyi_estimate(w_tilde):
    """Exponentiated second-order Renyi estimate ``mean((N w)^2)``; 1 for uniform."""
    n = len(w_tilde)
    return float(n * (w_tilde ** 2).sum())


def afm_replay_weights(adv, batch, obs, phi=None):
    """Self-normalized importance weights of the adversary on ``batch``."""
    X = obs.features if hasattr(obs, "features") else obs
    scores, _ = _scores(adv, X, batch.states, batch.actions)
    w = softmax(scores)
    res = np.zeros_like(adv.lam) if phi is None else w @ phi - phi.mean(axis=0)
    return AFMBatchWeights(w, renyi_estimate(w), res)


def replay_objective(w, err_sq, phi, lam, cfg):
    """Inner loss (minimization form) and its gradient w.r.t. the normalized weights."""
    n = len(w)
    k = (1.0 - cfg.delta_conf) / (n * cfg.delta_conf)
    d2 = n * (w ** 2).sum()
    pen = cfg.renyi_coeff * cfg.renyi_const
    sq = np.sqrt(k * d2)
    r = w @ phi - phi.mean(axis=0)
    slack = np.where(lam > 0, np.abs(r) - cfg.epsilon, 0.0)
    loss = -(w @ err_sq) + pen * sq + lam @ slack
    dw = -err_sq + pen * k * n * w / sq + phi @ (lam * np.sign(r))
    return loss, dw, r


def afm_replay_inner_step(adv, batch, obs, err_sq, phi):
    """One adversary step on a buffer batch, then clipping and a dual step."""
    cfg = adv.cfg
    X = obs.features if hasattr(obs, "features") else obs
    scores, cache = _scores(adv, X, batch.states, batch.actions)
    w = softmax(scores)
    _, dw, _ = replay_objective(w, err_sq, phi, adv.lam, cfg)
    dscore = w * (dw - w @ dw)
    if not np.all(np.isfinite(dscore)):
        _reset_replay(adv)
        return adv
    net = adv.net
    if net.is_tabular:
        g = np.zeros_like(net.params["table"])
        np.add.at(g, (batch.states, batch.actions), dscore)
        grads = {"table": g}
    else:
        h1, h2, out = cache
        dq = np.zeros_like(out)
        dq[np.arange(len(w)), batch.actions] = dscore
        grads = _mlp_backward(net.params, X[batch.states], h1, h2, dq)
    if cfg.optimistic:
        prev = adv.prev_grad or grads
        adv.prev_grad = grads
        grads = {k: 2 * grads[k] - prev[k] for k in grads}
    adv.opt.step(net.params, grads)
    _clip_params(net, cfg.clip)
    if not all(np.all(np.isfinite(v)) for v in net.params.values()):
        _reset_replay(adv)
        return adv
    w = softmax(_scores(adv, X, batch.states, batch.actions)[0])
    r = w @ phi - phi.mean(axis=0)
    adv.lam = np.maximum(0.0, adv.lam + cfg.dual_lr * (np.abs(r) - cfg.epsilon))
    adv.last_residual = r
    adv.steps += 1
    return adv


def _reset_replay(adv):
    for v in adv.net.params.values():
        v[...] = 0.0
    adv.opt = Adam(adv.net.params, adv.cfg.lr)
    adv.prev_grad = None
    adv.resets += 1


def afm_apply(mode, weights, batch, rng=None):
    """Turn AFM weights into a training batch and per-sample loss weights.

    ``weighting`` keeps the batch and returns weights ``w_i`` (equivalently each
    squared error times ``N w_i`` under the 1/N average); ``sampling`` resamples
    the batch from ``w`` with replacement and returns equal weights.
    """
    w = weights.weights if isinstance(weights, AFMBatchWeights) else np.asarray(weights)
    n = len(w)
    if mode == "weighting":
        return batch, w.copy()
    if mode == "sampling":
        if rng is None:
            raise ConfigurationError("sampling mode needs an rng")
        idx = rng.choice(n, size=n, p=w)
        return batch.take(idx), np.full(n, 1.0 / n)
    raise ConfigurationError(f"unknown AFM mode {mode!r}")
