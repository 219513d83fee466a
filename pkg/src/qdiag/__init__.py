"""Oracle-instrumented fitted Q-iteration on small MDPs with known dynamics."""
from qdiag.errors import (ConfigurationError, DivergenceError, NormalizationError, QDiagError,
                          UnsupportedOperationError)
from qdiag.mdp import (TabularMDP, alpha_smoothed_backup, bellman_backup, greedy_policy, occupancy,
                       policy_returns, solve_optimal, value_iteration)
from qdiag.envs import EnvSpec, default_suite, make_env, parse_env_name
from qdiag.funcapprox import ArchSpec, FitConfig, QNetwork, init_network, load_network, save_network
from qdiag.weighting import WeightingKind, make_distribution
from qdiag.afm import AFMConfig
from qdiag.fqi import (FQIConfig, IterationTrace, counterexample_divergence_demo, exact_fqi,
                       oracle_early_stop, replay_fqi, retrace_validation, sampled_fqi)

__version__ = "0.1.0"

__all__ = [
    "QDiagError", "ConfigurationError", "DivergenceError", "NormalizationError", "UnsupportedOperationError",
    "TabularMDP", "bellman_backup", "alpha_smoothed_backup", "value_iteration", "solve_optimal",
    "greedy_policy", "policy_returns", "occupancy",
    "EnvSpec", "parse_env_name", "make_env", "default_suite",
    "ArchSpec", "FitConfig", "QNetwork", "init_network", "save_network", "load_network",
    "WeightingKind", "make_distribution", "AFMConfig",
    "FQIConfig", "IterationTrace", "exact_fqi", "sampled_fqi", "replay_fqi", "oracle_early_stop",
    "retrace_validation", "counterexample_divergence_demo",
]
