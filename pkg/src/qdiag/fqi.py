"""Fitted Q-iteration drivers with oracle metrics.

Three drivers remove oracle components one at a time:

* :func:`exact_fqi` backs up and projects over every state-action pair using
  the known dynamics.
* :func:`sampled_fqi` draws ``M`` pairs from the weighting distribution and one
  successor per pair.
* :func:`replay_fqi` collects ``K`` online transitions per iteration into a ring
  buffer and fits on ``M`` transitions drawn from it.

Every iteration is scored against the exact oracles (Q*, exact policy returns),
so the recorded metrics carry no evaluation noise.

Random streams are derived from ``cfg.seed``::

    SeedSequence([seed, 2])   network initialization
    SeedSequence([seed, 3])   sampling (pairs, successors, minibatches, exploration)
    SeedSequence([seed, 4])   adversary initialization
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from qdiag import afm as afm_mod
from qdiag.buffer import ReplayBuffer, Transitions
from qdiag.errors import (ConfigurationError, DivergenceError, NormalizationError,
                          UnsupportedOperationError)
from qdiag.funcapprox import (ArchSpec, FitConfig, _fit_loop, _mlp_backward,
                              _mlp_forward, features, fit_samples, fit_weighted_projection,
                              forward_q, init_network, sample_loss_and_grad)
from qdiag.mdp import (PolicyEvaluation, alpha_smoothed_backup, bellman_backup, greedy_policy,
                       occupancy)
from qdiag.weighting import (WeightingContext, WeightingKind, expected_sq_error, make_distribution,
                             normalized_entropy, on_policy, prioritized, tv_distance)

EARLY_STOP_MODES = ("none", "oracle_bellman", "oracle_return")
REPLAY_OVERLAYS = ("none", "unif", "pi", "pistar", "prioritized", "per", "afm", "afm_sampling")
DIVERGENCE_FACTOR = 10.0
PER_FLOOR = 1e-6


@dataclass(frozen=True)
class FQIConfig:
    """Settings shared by the three drivers.

    ``overlay`` only applies to :func:`replay_fqi`; ``weighting`` to the exact and
    sampled drivers.  Replay-FQI takes ``grad_steps_ratio * online_samples_per_iter``
    gradient steps per iteration.
    """

    iterations: int = 50
    weighting: WeightingKind = WeightingKind("unif")
    arch: ArchSpec = ArchSpec("mlp", (64, 64))
    fit: FitConfig = FitConfig()
    alpha: float = 1.0
    samples_per_iter: int = 128
    online_samples_per_iter: int = 32
    buffer_capacity: int = 100_000
    grad_steps_ratio: int = 4
    early_stop: str = "none"
    overlay: str = "none"
    explore_epsilon: float = 0.1
    afm: afm_mod.AFMConfig = afm_mod.AFMConfig()
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.weighting, str):
            object.__setattr__(self, "weighting", WeightingKind(self.weighting))
        if isinstance(self.arch, str):
            object.__setattr__(self, "arch", ArchSpec.parse(self.arch))
        if self.iterations < 1:
            raise ConfigurationError("iterations must be at least 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in (0, 1]")
        if self.samples_per_iter < 1 or self.online_samples_per_iter < 1 or self.grad_steps_ratio < 1:
            raise ConfigurationError("sample counts and step ratio must be positive")
        if self.buffer_capacity < self.online_samples_per_iter:
            raise ConfigurationError("buffer capacity must hold one iteration of samples")
        if self.early_stop not in EARLY_STOP_MODES:
            raise ConfigurationError(f"early_stop must be one of {EARLY_STOP_MODES}")
        if self.overlay not in REPLAY_OVERLAYS:
            raise ConfigurationError(f"overlay must be one of {REPLAY_OVERLAYS}")


@dataclass
class IterationRecord:
    iteration: int
    return_norm: float
    linf_norm: float
    bellman_loss: float
    tv_shift: float
    loss_shift: float
    entropy_norm: float
    diverged: bool
    extras: dict = field(default_factory=dict)


@dataclass
class IterationTrace:
    """Per-iteration metrics plus the Q-tables (and optionally networks) visited.

    ``q_tables[0]`` is the initial Q; ``q_tables[t]`` the result of iteration t.
    ``mus[t-1]`` is the distribution used in iteration t.
    """

    records: list = field(default_factory=list)
    q_tables: list = field(default_factory=list)
    mus: list = field(default_factory=list)
    nets: list = field(default_factory=list)
    final_net: object = None
    halted: bool = False
    error: str = ""
    events: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def diverged(self):
        return self.halted or any(r.diverged for r in self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def final_return(self):
        return self.records[-1].return_norm if self.records else float("nan")


def _streams(seed):
    return {k: np.random.default_rng(np.random.SeedSequence([seed, k])) for k in (2, 3, 4)}


class _Metrics:
    """Exact per-iteration diagnostics, normalized by the expert return."""

    def __init__(self, mdp):
        self.mdp = mdp
        self.q_star = mdp.q_star
        self.eta = mdp.expert_returns
        if self.eta == 0:
            raise NormalizationError("expert returns are zero")
        self.qmax_star = np.abs(self.q_star).max()
        self.prev_mu = None
        self._returns = {}
        self._last_q = self._last_tq = None

    def greedy_return(self, q):
        """Exact return of the greedy policy, memoized on its action choices."""
        key = q.argmax(axis=1).tobytes()
        if key not in self._returns:
            if len(self._returns) > 256:
                self._returns.clear()
            self._returns[key] = PolicyEvaluation(self.mdp, greedy_policy(q, 0.0)).returns()
        return self._returns[key]

    def record(self, t, q_old, q_new, mu):
        mdp, eta = self.mdp, self.eta
        finite = bool(np.all(np.isfinite(q_new)))
        if finite:
            ret = self.greedy_return(q_new) / eta
            linf = np.abs(q_new - self.q_star).max() / eta
            tq_new = bellman_backup(mdp, q_new)
            bell = expected_sq_error(q_new, tq_new, mu) / eta ** 2
            diverged = bool(np.abs(q_new).max() > DIVERGENCE_FACTOR * self.qmax_star)
        else:
            tq_new = None
            ret, linf, bell, diverged = float("nan"), float("inf"), float("inf"), True
        if self.prev_mu is None:
            tv, shift = 0.0, 0.0
        else:
            tv = tv_distance(mu, self.prev_mu)
            tq_old = self._last_tq if q_old is self._last_q else bellman_backup(mdp, q_old)
            shift = (expected_sq_error(q_old, tq_old, mu)
                     - expected_sq_error(q_old, tq_old, self.prev_mu)) / eta ** 2
        self.prev_mu = mu
        self._last_q, self._last_tq = q_new, tq_new
        return IterationRecord(t, float(ret), float(linf), float(bell), float(tv), float(shift),
                               normalized_entropy(mu), diverged)


def oracle_early_stop(snapshots, mdp, obs, mode, mu=None):
    """Pick the snapshot with the lowest exact Bellman error or highest exact return.

    The Bellman error is measured under ``mu`` (uniform when omitted).  Ties go to
    the earliest snapshot.
    """
    if not snapshots:
        raise ConfigurationError("no snapshots to choose from")
    if mode not in ("oracle_bellman", "oracle_return"):
        raise ConfigurationError(f"unknown early stopping mode {mode!r}")
    if len(snapshots) == 1:
        return snapshots[0].net
    if mu is None:
        mu = np.full(mdp.rewards.shape, 1.0 / mdp.rewards.size)
    best, best_score = None, -math.inf
    for snap in snapshots:
        q = forward_q(snap.net, obs)
        if not np.all(np.isfinite(q)):
            continue
        if mode == "oracle_return":
            score = PolicyEvaluation(mdp, greedy_policy(q, 0.0)).returns()
        else:
            score = -expected_sq_error(q, bellman_backup(mdp, q), mu)
        if score > best_score:
            best, best_score = snap.net, score
    return best if best is not None else snapshots[-1].net


def _new_net(cfg, mdp, obs, rng):
    return init_network(cfg.arch, obs.dim, mdp.num_actions, rng, num_states=mdp.num_states)


def _halt(trace, exc):
    trace.halted = True
    trace.error = f"{type(exc).__name__}: {exc}"
    trace.events.append(("halt", trace.error))
    return trace


# -- exact FQI -------------------------------------------------------------------

def _afm_exact_fit(net, obs, y, adv, fit_cfg, iteration, rng):
    """Interleave ``K`` adversary steps with every Q gradient step.

    Features and their reference mean are frozen for the whole fit.  With a
    minibatch size the Q step uses pairs drawn from the adversary's distribution.
    """
    phi, ref = afm_mod.standardize(features(net, obs))
    X = obs.features
    K = adv.cfg.inner_steps
    A = y.shape[1]
    B = fit_cfg.batch_size
    state = {}

    def step(n, _):
        h1, h2, q = _mlp_forward(n.params, X)
        diff = q - y
        err = diff * diff
        for _ in range(K):
            afm_mod.exact_step(adv, err, phi, ref)
        mu = afm_mod.afm_exact_distribution(adv)
        state["mu"] = mu
        if B:
            s, a = np.divmod(rng.choice(mu.size, size=B, p=mu.ravel()), A)
            return sample_loss_and_grad(n, obs, s, a, y[s, a], np.full(B, 1.0 / B))
        return float((mu * err).sum()), _mlp_backward(n.params, X, h1, h2, 2.0 * mu * diff)

    net, snaps = _fit_loop(net, fit_cfg, step, iteration)
    return net, snaps, state.get("mu", afm_mod.afm_exact_distribution(adv))


def exact_fqi(mdp, obs, cfg, keep_nets=False):
    """Exact-FQI: full backups (optionally alpha-smoothed) and weighted projections."""
    rngs = _streams(cfg.seed)
    net = _new_net(cfg, mdp, obs, rngs[2])
    metrics = _Metrics(mdp)
    q = forward_q(net, obs)
    trace = IterationTrace(q_tables=[q])
    if keep_nets:
        trace.nets.append(net.copy())
    kind = cfg.weighting
    adv = None
    if kind.tag == "afm":
        if net.is_tabular:
            raise UnsupportedOperationError("AFM weighting needs an mlp architecture")
        adv = afm_mod.new_exact_adversary(mdp.num_states, mdp.num_actions, cfg.arch.hidden[1], cfg.afm)
    history = []
    for t in range(1, cfg.iterations + 1):
        try:
            y = alpha_smoothed_backup(mdp, q, cfg.alpha)
            if adv is not None:
                fitted, snaps, mu = _afm_exact_fit(net, obs, y, adv, cfg.fit, t, rngs[3])
            else:
                ctx = WeightingContext(mdp, q=q, q_star=metrics.q_star, history=history)
                mu = make_distribution(kind, ctx)
                fitted, snaps = fit_weighted_projection(net, obs, y, mu, cfg.fit, rngs[3], t)
            if kind.needs_history:
                history.append(on_policy(mdp, q, kind.epsilon))
            if cfg.early_stop != "none":
                fitted = oracle_early_stop(snaps, mdp, obs, cfg.early_stop,
                                           mu=on_policy(mdp, q, cfg.explore_epsilon))
            q_new = forward_q(fitted, obs)
        except DivergenceError as exc:
            return _halt(trace, exc)
        trace.records.append(metrics.record(t, q, q_new, mu))
        trace.mus.append(mu)
        trace.q_tables.append(q_new)
        if adv is not None:
            trace.records[-1].extras.update(_afm_extras(adv))
        net, q = fitted, q_new
        if keep_nets:
            trace.nets.append(net.copy())
        if not np.all(np.isfinite(q)):
            return _halt(trace, DivergenceError("non-finite Q-values", t))
    trace.final_net = net
    return trace


def _afm_extras(adv):
    r = adv.last_residual
    return {"afm_residual": float(np.abs(r).max()) if r is not None else 0.0,
            "afm_lambda": float(adv.lam.max()) if adv.lam.size else 0.0,
            "afm_resets": adv.resets}


# -- sampled FQI -----------------------------------------------------------------

def _sample_pairs(mu, n, rng):
    S, A = mu.shape
    idx = rng.choice(S * A, size=n, p=mu.ravel() / mu.sum())
    return np.divmod(idx, A)


def sampled_fqi(mdp, obs, cfg, exhaustive=False, keep_nets=False):
    """Sampled-FQI: Monte-Carlo pairs from the weighting and sampled successors.

    With ``exhaustive=True`` every pair is used once, weighted by ``mu``, with
    exact expected targets; this recovers :func:`exact_fqi` and exists to check
    the estimator at its limit.
    """
    rngs = _streams(cfg.seed)
    rng = rngs[3]
    net = _new_net(cfg, mdp, obs, rngs[2])
    metrics = _Metrics(mdp)
    q = forward_q(net, obs)
    trace = IterationTrace(q_tables=[q])
    if keep_nets:
        trace.nets.append(net.copy())
    kind = cfg.weighting
    if kind.tag == "afm":
        raise ConfigurationError("sampled FQI does not support AFM; use replay_fqi overlays")
    S, A = mdp.num_states, mdp.num_actions
    history = []
    g = mdp.discount
    for t in range(1, cfg.iterations + 1):
        try:
            if not np.all(np.isfinite(q)):
                raise DivergenceError("non-finite Q-values", t)
            ctx = WeightingContext(mdp, q=q, q_star=metrics.q_star, history=history)
            mu = make_distribution(kind, ctx)
            if kind.needs_history:
                history.append(on_policy(mdp, q, kind.epsilon))
            if exhaustive:
                s, a = np.divmod(np.arange(S * A), A)
                y = alpha_smoothed_backup(mdp, q, cfg.alpha)[s, a]
                w = mu.ravel()
            else:
                s, a = _sample_pairs(mu, cfg.samples_per_iter, rng)
                s2 = mdp.sample_next_states(s, a, rng)
                y = mdp.rewards[s, a] + g * q[s2].max(axis=1)
                if cfg.alpha < 1.0:
                    y = cfg.alpha * y + (1.0 - cfg.alpha) * q[s, a]
                w = None
            fitted, snaps = fit_samples(net, obs, s, a, y, cfg.fit, weights=w, rng=rng, iteration=t)
            if cfg.early_stop != "none":
                fitted = oracle_early_stop(snaps, mdp, obs, cfg.early_stop,
                                           mu=on_policy(mdp, q, cfg.explore_epsilon))
            q_new = forward_q(fitted, obs)
        except DivergenceError as exc:
            return _halt(trace, exc)
        trace.records.append(metrics.record(t, q, q_new, mu))
        trace.mus.append(mu)
        trace.q_tables.append(q_new)
        net, q = fitted, q_new
        if keep_nets:
            trace.nets.append(net.copy())
        if not np.all(np.isfinite(q)):
            return _halt(trace, DivergenceError("non-finite Q-values", t))
    trace.final_net = net
    return trace


# -- replay FQI ------------------------------------------------------------------

class OnlineCollector:
    """Epsilon-greedy data collection with restarts from rho0 at rate ``1 - gamma``.

    Restarting with probability ``1 - gamma`` after each step makes the long-run
    visitation frequencies equal the discounted occupancy of the behavior policy.
    """

    def __init__(self, mdp, rng):
        self.mdp = mdp
        self.rng = rng
        self.state = self._reset()

    def _reset(self):
        return int(self.rng.choice(self.mdp.num_states, p=self.mdp.initial_dist))

    def collect(self, policy, n):
        mdp, rng = self.mdp, self.rng
        A = mdp.num_actions
        s_out = np.empty(n, dtype=np.int64)
        a_out = np.empty(n, dtype=np.int64)
        s2_out = np.empty(n, dtype=np.int64)
        for i in range(n):
            s = self.state
            a = int(rng.choice(A, p=policy[s]))
            s2 = int(mdp.sample_next_states(np.array([s]), np.array([a]), rng)[0])
            s_out[i], a_out[i], s2_out[i] = s, a, s2
            self.state = self._reset() if rng.random() < 1.0 - mdp.discount else s2
        return Transitions(s_out, a_out, mdp.rewards[s_out, a_out], s2_out)


def _overlay_weights(overlay, mdp, q, q_star, buffer, batch, epsilon):
    """Self-normalized importance weights ``mu / p_buffer`` for analytic overlays."""
    S, A = mdp.num_states, mdp.num_actions
    if overlay == "unif":
        mu = np.full((S, A), 1.0 / (S * A))
    elif overlay == "pi":
        mu = on_policy(mdp, q, epsilon)
    elif overlay == "pistar":
        mu = occupancy(mdp, greedy_policy(q_star, 0.0))
    else:
        mu = prioritized(mdp, q)
    p_rb = buffer.pair_frequencies(S, A)
    w = mu[batch.states, batch.actions] / p_rb[batch.states, batch.actions]
    total = w.sum()
    if total <= 0 or not np.isfinite(total):
        return np.full(len(batch), 1.0 / len(batch))
    return w / total


def _afm_replay_fit(net, obs, batch, y, adv, fit_cfg, mode, rng, iteration):
    """Q gradient steps on ``batch``, each preceded by ``K`` adversary steps."""
    X = obs.features
    phi, _ = afm_mod.standardize(features(net, obs)[batch.states])
    K = adv.cfg.inner_steps
    idx = np.arange(len(batch))
    diag = {}

    def step(n, _):
        _, _, out = _mlp_forward(n.params, X[batch.states])
        err = (out[idx, batch.actions] - y) ** 2
        for _ in range(K):
            afm_mod.afm_replay_inner_step(adv, batch, obs, err, phi)
        weights = afm_mod.afm_replay_weights(adv, batch, obs, phi)
        diag["renyi"] = weights.renyi
        diag["residual"] = float(np.abs(weights.residual).max())
        if mode == "sampling":
            pick = rng.choice(len(batch), size=len(batch), p=weights.weights)
            w = np.full(len(batch), 1.0 / len(batch))
            return sample_loss_and_grad(n, obs, batch.states[pick], batch.actions[pick], y[pick], w)
        return sample_loss_and_grad(n, obs, batch.states, batch.actions, y, weights.weights)

    net, snaps = _fit_loop(net, fit_cfg, step, iteration)
    return net, snaps, diag


def replay_fqi(mdp, obs, cfg, keep_nets=False):
    """Replay-FQI with an optional weighting overlay on buffer samples.

    Overlays: ``none`` (uniform buffer samples), analytic importance weights
    towards ``unif``/``pi``/``pistar``/``prioritized``, ``per`` (sampling
    proportional to ``|delta| + 1e-6`` without importance correction), ``afm``
    (adversarial self-normalized weights) and ``afm_sampling`` (resampling from
    the adversary's weights).
    """
    rngs = _streams(cfg.seed)
    rng = rngs[3]
    net = _new_net(cfg, mdp, obs, rngs[2])
    metrics = _Metrics(mdp)
    q = forward_q(net, obs)
    trace = IterationTrace(q_tables=[q])
    if keep_nets:
        trace.nets.append(net.copy())
    S, A = mdp.num_states, mdp.num_actions
    K, M = cfg.online_samples_per_iter, cfg.samples_per_iter
    buffer = ReplayBuffer(cfg.buffer_capacity, S)
    collector = OnlineCollector(mdp, rng)
    overlay = cfg.overlay
    adv = None
    if overlay in ("afm", "afm_sampling"):
        if net.is_tabular:
            raise UnsupportedOperationError("AFM overlays need an mlp architecture")
        adv = afm_mod.new_replay_adversary(cfg.arch, obs.dim, A, cfg.arch.hidden[1], rngs[4],
                                           cfg.afm, num_states=S)
    fit_cfg = replace(cfg.fit, max_steps=cfg.grad_steps_ratio * K, tol=0.0, batch_size=0)
    g = mdp.discount
    for t in range(1, cfg.iterations + 1):
        extras = {}
        try:
            if not np.all(np.isfinite(q)):
                raise DivergenceError("non-finite Q-values", t)
            buffer.add(collector.collect(greedy_policy(q, cfg.explore_epsilon), K))
            contents = buffer.contents()
            if overlay == "per":
                delta = contents.targets(q, g) - q[contents.states, contents.actions]
                prio = np.abs(delta) + PER_FLOOR
                batch, _ = buffer.sample(M, rng, probs=prio / prio.sum())
            else:
                batch, _ = buffer.sample(M, rng)
            y = batch.targets(q, g)
            if cfg.alpha < 1.0:
                y = cfg.alpha * y + (1.0 - cfg.alpha) * q[batch.states, batch.actions]
            if adv is not None:
                mode = "sampling" if overlay == "afm_sampling" else "weighting"
                fitted, snaps, extras = _afm_replay_fit(net, obs, batch, y, adv, fit_cfg, mode, rng, t)
                extras = {f"afm_{k}": v for k, v in extras.items()}
                extras["afm_resets"] = adv.resets
            else:
                w = None
                if overlay in ("unif", "pi", "pistar", "prioritized"):
                    w = _overlay_weights(overlay, mdp, q, metrics.q_star, buffer, batch,
                                         cfg.explore_epsilon)
                fitted, snaps = fit_samples(net, obs, batch.states, batch.actions, y, fit_cfg,
                                            weights=w, rng=rng, iteration=t)
            if cfg.early_stop != "none":
                fitted = oracle_early_stop(snaps, mdp, obs, cfg.early_stop,
                                           mu=on_policy(mdp, q, cfg.explore_epsilon))
            q_new = forward_q(fitted, obs)
        except DivergenceError as exc:
            return _halt(trace, exc)
        mu = buffer.pair_frequencies(S, A)
        trace.records.append(metrics.record(t, q, q_new, mu))
        trace.records[-1].extras.update(extras)
        trace.mus.append(mu)
        trace.q_tables.append(q_new)
        net, q = fitted, q_new
        if keep_nets:
            trace.nets.append(net.copy())
        if not np.all(np.isfinite(q)):
            return _halt(trace, DivergenceError("non-finite Q-values", t))
    trace.final_net = net
    trace.buffer = buffer
    return trace


# -- retrace validation ------------------------------------------------------------

INFINITE_BUDGET = math.inf


def retrace_validation(reference, mdp, obs, budgets, fit_cfg, epsilon=0.1, seed=0,
                       sources=("onpolicy", "buffer")):
    """Replay a reference run's projections with limited data.

    For every iteration ``t`` of ``reference`` (which must keep its networks) the
    projection of ``T Q^t`` is refit from ``Q^t`` using ``B`` fresh on-policy
    samples (``onpolicy``), or every sample collected so far at ``B`` per iteration
    (``buffer``).  ``math.inf`` in ``budgets`` means the exact weighted
    projection.  Each entry of the result maps ``(source, B)`` to the per-iteration
    exact on-policy validation error ``E_pi[(Q_hat - T Q^t)^2]`` normalized by the
    squared expert return.
    """
    if len(reference.nets) < len(reference.q_tables):
        raise ConfigurationError("reference trace must be produced with keep_nets=True")
    eta2 = mdp.expert_returns ** 2
    g = mdp.discount
    rows = {}
    n_iter = len(reference.records)
    for B in budgets:
        for source in (("exact",) if B == INFINITE_BUDGET else sources):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 5, 0 if B == INFINITE_BUDGET else int(B)]))
            parts = []
            losses = []
            for t in range(n_iter):
                q_t = reference.q_tables[t]
                net_t = reference.nets[t]
                tq = bellman_backup(mdp, q_t)
                mu = on_policy(mdp, q_t, epsilon)
                if source == "exact":
                    fitted, _ = fit_weighted_projection(net_t, obs, tq, mu, fit_cfg)
                else:
                    s, a = _sample_pairs(mu, int(B), rng)
                    s2 = mdp.sample_next_states(s, a, rng)
                    parts.append(Transitions(s, a, mdp.rewards[s, a], s2))
                    data = parts[-1] if source == "onpolicy" else Transitions.concat(parts)
                    y = data.targets(q_t, g)
                    fitted, _ = fit_samples(net_t, obs, data.states, data.actions, y, fit_cfg, rng=rng)
                q_hat = forward_q(fitted, obs)
                losses.append(expected_sq_error(q_hat, tq, mu) / eta2)
            rows[(source, B)] = np.array(losses)
    return rows


# -- linear divergence counterexample ---------------------------------------------

def counterexample_divergence_demo(gamma, steps):
    """Least-squares FQI on two states with features 1 and 2, sampling only state 1.

    The only sampled transition goes 1 -> 2 with zero reward, so each projection
    solves ``argmin_w (w - 2 gamma w_t)^2``.  Returns ``w_0 .. w_steps``; the
    iterates grow without bound whenever ``gamma > 0.5``.
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    if steps < 1:
        raise ConfigurationError("steps must be at least 1")
    x = np.array([1.0, 2.0])
    mu = np.array([1.0, 0.0])
    w = np.empty(steps + 1)
    w[0] = 1.0
    for t in range(steps):
        target = np.array([0.0 + gamma * x[1] * w[t], 0.0])
        w[t + 1] = (mu * x * target).sum() / (mu * x * x).sum()
    return w
