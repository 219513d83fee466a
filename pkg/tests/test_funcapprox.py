import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdiag.envs import make_env
from qdiag.errors import ConfigurationError, DivergenceError, UnsupportedOperationError
from qdiag.funcapprox import (SWEEP_ARCHS, TABULAR, ArchSpec, FitConfig, features,
                              fit_samples, fit_weighted_projection, forward_q, init_network,
                              load_network, loss_and_grad, network_bytes, sample_loss_and_grad,
                              save_network)


def _net(hidden=(4, 4), D=5, A=3, seed=0):
    return init_network(ArchSpec("mlp", hidden), D, A, np.random.default_rng(seed))


def reference_forward(net, X):
    """Loop-based re-implementation used as an oracle for the vectorized pass."""
    p = net.params
    out = np.empty((X.shape[0], net.num_actions))
    for i, x in enumerate(X):
        h1 = [max(0.0, sum(x[d] * p["W1"][d, j] for d in range(len(x))) + p["b1"][j])
              for j in range(p["W1"].shape[1])]
        h2 = [max(0.0, sum(h1[d] * p["W2"][d, j] for d in range(len(h1))) + p["b2"][j])
              for j in range(p["W2"].shape[1])]
        for a in range(net.num_actions):
            out[i, a] = sum(h2[d] * p["Wout"][d, a] for d in range(len(h2))) + p["bout"][a]
    return out


# -- architecture names ------------------------------------------------------------

@pytest.mark.parametrize("text,expected", [("64x64", (64, 64)), ("(16, 16)", (16, 16)), ("4,4", (4, 4))])
def test_parse_arch(text, expected):
    assert ArchSpec.parse(text).hidden == expected


def test_parse_tabular_and_bad():
    assert ArchSpec.parse("tabular") == TABULAR
    with pytest.raises(ConfigurationError):
        ArchSpec.parse("64x")
    with pytest.raises(ConfigurationError):
        ArchSpec("mlp", (0, 4))


# -- forward pass -------------------------------------------------------------------

def test_zero_weights_give_output_bias():
    net = _net()
    for k in net.params:
        net.params[k][:] = 0.0
    net.params["bout"][:] = [1.0, -2.0, 0.5]
    q = forward_q(net, np.random.default_rng(1).normal(size=(7, 5)))
    np.testing.assert_array_equal(q, np.tile([1.0, -2.0, 0.5], (7, 1)))


def test_tabular_forward_is_identity():
    net = init_network(TABULAR, 4, 2, None, num_states=4)
    net.params["table"][:] = np.arange(8.0).reshape(4, 2)
    np.testing.assert_array_equal(forward_q(net, np.eye(4)), np.arange(8.0).reshape(4, 2))


def test_forward_matches_loop_implementation():
    net = _net((6, 5), D=4, A=3, seed=3)
    X = np.random.default_rng(2).normal(size=(9, 4))
    np.testing.assert_allclose(forward_q(net, X), reference_forward(net, X), atol=1e-10)


def test_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        forward_q(_net(D=5), np.zeros((3, 4)))


def test_features_consistency_and_shape():
    net = _net((8, 6), D=5)
    X = np.random.default_rng(4).normal(size=(10, 5))
    phi = features(net, X)
    assert phi.shape == (10, 6)
    q = phi @ net.params["Wout"] + net.params["bout"]
    assert np.abs(forward_q(net, X) - q).max() < 1e-12


def test_features_zero_when_preactivations_negative():
    net = _net((4, 4))
    net.params["b2"][:] = -1e6
    np.testing.assert_array_equal(features(net, np.ones((3, 5))), 0.0)


def test_features_of_table_unsupported():
    with pytest.raises(UnsupportedOperationError):
        features(init_network(TABULAR, 2, 2, None, num_states=2), np.eye(2))


# -- gradients ---------------------------------------------------------------------

@pytest.mark.parametrize("arch", [a for a in SWEEP_ARCHS if a.kind == "mlp" and a.hidden[0] <= 64],
                         ids=lambda a: a.name)
def test_gradient_matches_central_differences(arch):
    rng = np.random.default_rng(11)
    S, D, A = 6, 5, 3
    net = init_network(arch, D, A, rng)
    X = rng.normal(size=(S, D))
    y = rng.normal(size=(S, A))
    mu = rng.dirichlet(np.ones(S * A)).reshape(S, A)
    _, grads = loss_and_grad(net, X, y, mu)
    h = 1e-5
    worst = 0.0
    names = list(net.params)
    for _ in range(20):
        k = names[rng.integers(len(names))]
        idx = tuple(rng.integers(n) for n in net.params[k].shape)
        old = net.params[k][idx]
        net.params[k][idx] = old + h
        up = loss_and_grad(net, X, y, mu)[0]
        net.params[k][idx] = old - h
        down = loss_and_grad(net, X, y, mu)[0]
        net.params[k][idx] = old
        fd = (up - down) / (2 * h)
        worst = max(worst, abs(fd - grads[k][idx]) / max(abs(fd), abs(grads[k][idx]), 1e-6))
    assert worst < 1e-4


def test_gradient_vanishes_at_own_outputs():
    net = _net()
    X = np.random.default_rng(0).normal(size=(6, 5))
    mu = np.full((6, 3), 1 / 18)
    loss, grads = loss_and_grad(net, X, forward_q(net, X), mu)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_point_mass_weighting_is_pointwise_gradient():
    net = _net()
    X = np.random.default_rng(0).normal(size=(6, 5))
    y = np.random.default_rng(1).normal(size=(6, 3))
    mu = np.zeros((6, 3))
    mu[2, 1] = 1.0
    loss, grads = loss_and_grad(net, X, y, mu)
    loss2, grads2 = sample_loss_and_grad(net, X, np.array([2]), np.array([1]), y[2:3, 1], np.ones(1))
    assert loss == pytest.approx(loss2)
    for k in grads:
        np.testing.assert_allclose(grads[k], grads2[k], atol=1e-14)


# -- fitting -----------------------------------------------------------------------

def test_tabular_projection_under_full_support_is_exact():
    net = init_network(TABULAR, 4, 2, None, num_states=4)
    y = np.random.default_rng(0).normal(size=(4, 2))
    out, _ = fit_weighted_projection(net, np.eye(4), y, np.full((4, 2), 1 / 8), FitConfig())
    np.testing.assert_array_equal(out.params["table"], y)
    again, _ = fit_weighted_projection(out, np.eye(4), y, np.full((4, 2), 1 / 8), FitConfig())
    np.testing.assert_array_equal(again.params["table"], out.params["table"])


def test_tabular_projection_only_changes_support():
    net = init_network(TABULAR, 3, 2, None, num_states=3)
    mu = np.zeros((3, 2))
    mu[1, 0] = 1.0
    out, _ = fit_weighted_projection(net, np.eye(3), np.full((3, 2), 5.0), mu, FitConfig())
    expected = np.zeros((3, 2))
    expected[1, 0] = 5.0
    np.testing.assert_array_equal(out.params["table"], expected)


def test_mlp_point_support_fit_drives_loss_to_zero():
    net = _net((16, 16))
    X = np.random.default_rng(0).normal(size=(6, 5))
    mu = np.zeros((6, 3))
    mu[4, 2] = 1.0
    y = np.full((6, 3), 3.0)
    out, snaps = fit_weighted_projection(net, X, y, mu, FitConfig(lr=1e-2, max_steps=2000, tol=0.0))
    assert abs(forward_q(out, X)[4, 2] - 3.0) < 1e-3
    assert snaps[0].step == 0 and snaps[-1].step == 2000


def test_mlp_fits_optimal_values_on_gridworld():
    _, mdp, obs = make_env("gridworld-16-onehot", 0)
    net = init_network(ArchSpec("mlp", (64, 64)), obs.dim, mdp.num_actions, np.random.default_rng(0))
    mu = np.full(mdp.rewards.shape, 1.0 / mdp.rewards.size)
    y = mdp.q_star
    initial = loss_and_grad(net, obs, y, mu)[0]
    out, _ = fit_weighted_projection(net, obs, y, mu, FitConfig(max_steps=2000, tol=0.0))
    assert loss_and_grad(out, obs, y, mu)[0] < 0.01 * initial


def test_non_finite_targets_raise_with_iteration():
    net = _net()
    y = np.full((6, 3), np.nan)
    with pytest.raises(DivergenceError) as exc:
        fit_weighted_projection(net, np.zeros((6, 5)), y, np.full((6, 3), 1 / 18), FitConfig(), iteration=7)
    assert exc.value.iteration == 7


@pytest.mark.filterwarnings("ignore:overflow")
def test_exploding_loss_raises():
    net = _net()
    y = np.full((6, 3), 1e200)
    with pytest.raises(DivergenceError):
        fit_weighted_projection(net, np.ones((6, 5)), y, np.full((6, 3), 1 / 18), FitConfig(max_steps=3))


def test_tolerance_stops_early():
    net = _net()
    X = np.random.default_rng(0).normal(size=(6, 5))
    mu = np.full((6, 3), 1 / 18)
    _, snaps = fit_weighted_projection(net, X, forward_q(net, X) + 1e-9, mu,
                                       FitConfig(max_steps=5000, tol=0.5, snapshot_every=10))
    assert snaps[-1].step < 5000


def test_fit_is_deterministic():
    X = np.random.default_rng(0).normal(size=(20, 5))
    y = np.random.default_rng(1).normal(size=(20, 3))
    mu = np.full((20, 3), 1 / 60)
    cfg = FitConfig(max_steps=50, batch_size=8, tol=0.0)
    a, _ = fit_weighted_projection(_net(), X, y, mu, cfg, rng=np.random.default_rng(5))
    b, _ = fit_weighted_projection(_net(), X, y, mu, cfg, rng=np.random.default_rng(5))
    assert network_bytes(a) == network_bytes(b)


def test_minibatch_needs_rng():
    with pytest.raises(ConfigurationError):
        fit_weighted_projection(_net(), np.zeros((2, 5)), np.zeros((2, 3)), np.full((2, 3), 1 / 6),
                                FitConfig(batch_size=4))


def test_tabular_sample_fit_is_weighted_mean():
    net = init_network(TABULAR, 2, 2, None, num_states=2)
    s, a = np.array([0, 0, 1]), np.array([1, 1, 0])
    y = np.array([1.0, 3.0, 7.0])
    out, _ = fit_samples(net, np.eye(2), s, a, y, FitConfig(), weights=np.array([0.25, 0.75, 1.0]))
    np.testing.assert_allclose(out.params["table"], [[0.0, 2.5], [7.0, 0.0]])


def test_fit_config_validation():
    with pytest.raises(ConfigurationError):
        FitConfig(lr=0)
    with pytest.raises(ConfigurationError):
        FitConfig(max_steps=0)
    with pytest.raises(ConfigurationError):
        FitConfig(batch_size=-1)


# -- persistence --------------------------------------------------------------------

@pytest.mark.parametrize("hidden", [(4, 4), (16, 8)])
def test_qnet_round_trip(hidden, tmp_path):
    net = _net(hidden, D=7, A=2, seed=9)
    path = tmp_path / "n.qnet"
    save_network(net, path)
    back = load_network(path)
    assert back.arch == net.arch and back.input_dim == 7 and back.num_actions == 2
    for k in net.params:
        np.testing.assert_array_equal(back.params[k], net.params[k])
    assert path.read_bytes()[:5] == b"QNET1"
    assert len(path.read_bytes()) == 5 + 20 + 8 * net.num_parameters()


def test_tabular_round_trip():
    net = init_network(TABULAR, 3, 2, None, num_states=3)
    net.params["table"][:] = np.arange(6.0).reshape(3, 2)
    back = load_network(io.BytesIO(network_bytes(net)))
    np.testing.assert_array_equal(back.params["table"], net.params["table"])


def test_corrupt_files_rejected():
    with pytest.raises(ConfigurationError):
        load_network(io.BytesIO(b"NOPE!"))
    with pytest.raises(ConfigurationError):
        load_network(io.BytesIO(network_bytes(_net())[:-3]))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 6), st.integers(1, 4), st.integers(0, 2 ** 31))
def test_round_trip_property(n1, n2, D, A, seed):
    net = init_network(ArchSpec("mlp", (n1, n2)), D, A, np.random.default_rng(seed))
    back = load_network(io.BytesIO(network_bytes(net)))
    assert network_bytes(back) == network_bytes(net)
