import numpy as np
import pytest

from qdiag.config import (ExperimentConfig, apply_seed_override, config_hash, from_dict,
                          load_config)
from qdiag.errors import ConfigurationError

TOML = """
algorithm = "exact"
envs = ["cliffwalk-16", "gridworld-16-onehot"]
archs = ["tabular", "(16, 16)"]
weightings = ["unif", "pi_star"]
seeds = [0, 1]
projection_steps = 10

[fqi]
iterations = 5
alpha = 0.9

[fit]
max_steps = 20
betas = [0.9, 0.99]

[afm]
epsilon = 0.1
"""


def test_load_and_canonicalize(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(TOML)
    cfg = load_config(path, environ={})
    assert cfg.archs == ("tabular", "16x16")
    assert cfg.weightings == ("unif", "pistar")
    assert len(cfg.cells()) == 2 * 2 * 2 * 2
    fqi = cfg.fqi_config("16x16", "pistar", 1)
    assert fqi.iterations == 5 and fqi.alpha == 0.9 and fqi.seed == 1
    assert fqi.fit.betas == (0.9, 0.99) and fqi.afm.epsilon == 0.1


def test_cells_order_is_env_arch_weighting_seed():
    cfg = ExperimentConfig(envs=("cliffwalk-4",), archs=("4x4", "8x8"), weightings=("unif",), seeds=(0, 1))
    assert cfg.cells() == [("cliffwalk-4", "4x4", "unif", 0), ("cliffwalk-4", "4x4", "unif", 1),
                           ("cliffwalk-4", "8x8", "unif", 0), ("cliffwalk-4", "8x8", "unif", 1)]


def test_hash_ignores_spelling_and_explicit_defaults():
    a = ExperimentConfig(envs=("cliffwalk-16",), archs=("64x64",), weightings=("unif",))
    b = ExperimentConfig(envs=["cliffwalk-16"], archs=["(64,64)"], weightings=["uniform"],
                         fqi={"iterations": 50}, fit={"lr": 1e-3})
    assert a.hash == b.hash
    assert len(a.hash) == 16 and int(a.hash, 16) >= 0


@pytest.mark.parametrize("change", [
    dict(envs=("cliffwalk-8",)), dict(archs=("16x16",)), dict(weightings=("pi",)), dict(seeds=(0,)),
    dict(discount=0.9), dict(env_seed=3), dict(projection_steps=5), dict(algorithm="sampled"),
    dict(fqi={"iterations": 7}), dict(fit={"max_steps": 9}), dict(afm={"epsilon": 0.2}),
])
def test_any_field_change_changes_hash(change):
    base = dict(envs=("cliffwalk-16",), archs=("64x64",), weightings=("unif",))
    assert ExperimentConfig(**{**base, **change}).hash != ExperimentConfig(**base).hash


def test_hash_is_stable_across_processes():
    # pinned: the hash is part of the on-disk layout
    assert config_hash({"b": 1, "a": [1.5, "x"]}) == config_hash({"a": [1.5, "x"], "b": 1})
    assert config_hash({}) == "44136fa355b3678a"


@pytest.mark.parametrize("data", [
    {"envs": ["nowhere-3"]},
    {"envs": ["cliffwalk-16"], "colour": "red"},
    {"envs": ["cliffwalk-16"], "fqi": {"iterationz": 3}},
    {"envs": ["cliffwalk-16"], "fit": {"lr": -1.0}},
    {"envs": ["cliffwalk-16"], "algorithm": "magic"},
    {"envs": ["cliffwalk-16"], "algorithm": "replay", "weightings": ["random"]},
    {"envs": ["cliffwalk-16"], "seeds": [-1]},
    {"envs": ["cliffwalk-16"], "discount": 1.0},
    {"envs": []},
    {"archs": ["4x4"]},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigurationError):
        from_dict(data)


def test_replay_weightings_are_overlays():
    cfg = from_dict({"envs": ["cliffwalk-16"], "algorithm": "replay", "weightings": ["per", "afm_sampling"]})
    assert cfg.fqi_config("64x64", "per", 0).overlay == "per"


def test_seed_override():
    cfg = from_dict({"envs": ["cliffwalk-16"]})
    assert apply_seed_override(cfg, {"QDIAG_SEED": "7"}).seeds == (7,)
    assert apply_seed_override(cfg, {}).seeds == (0, 1, 2, 3, 4)
    with pytest.raises(ConfigurationError):
        apply_seed_override(cfg, {"QDIAG_SEED": "seven"})


def test_bad_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("envs = [\n")
    with pytest.raises(ConfigurationError):
        load_config(path, environ={})


def test_explore_epsilon_reaches_weighting():
    cfg = from_dict({"envs": ["cliffwalk-16"], "weightings": ["pi"], "fqi": {"explore_epsilon": 0.3}})
    assert np.isclose(cfg.fqi_config("4x4", "pi", 0).weighting.epsilon, 0.3)
