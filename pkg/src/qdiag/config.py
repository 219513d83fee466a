"""Sweep configuration: validated TOML ingestion plus a stable content hash.

Grammar (TOML)::

    algorithm  = "exact"                 # exact | sampled | replay
    envs       = ["gridworld-16-onehot"]
    archs      = ["tabular", "64x64"]
    weightings = ["unif", "pi"]          # replay mode: overlay names
    seeds      = [0, 1, 2, 3, 4]
    discount   = 0.95                    # optional
    env_seed   = 0                       # optional; defaults to each run seed
    projection_steps = 2000              # 0 disables the projection baseline

    [fqi]       # any FQIConfig scalar field
    iterations = 50
    [fit]       # any FitConfig field
    max_steps = 500
    [afm]       # any AFMConfig field
    epsilon = 0.05

Unknown keys are rejected so typos never silently fall back to defaults.
"""
import dataclasses
import hashlib
import json
import os
import sys

from qdiag.afm import AFMConfig
from qdiag.envs import DEFAULT_DISCOUNT, parse_env_name
from qdiag.errors import ConfigurationError
from qdiag.fqi import REPLAY_OVERLAYS, FQIConfig
from qdiag.funcapprox import ArchSpec, FitConfig
from qdiag.weighting import WeightingKind

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGORITHMS = ("exact", "sampled", "replay")
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
SEED_ENV_VAR = "QDIAG_SEED"
_FQI_SCALARS = {f.name for f in dataclasses.fields(FQIConfig)} - {"weighting", "arch", "fit", "afm", "seed"}
_TOP_KEYS = {"algorithm", "envs", "archs", "weightings", "seeds", "discount", "env_seed",
             "projection_steps", "fqi", "fit", "afm"}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    envs: tuple
    algorithm: str = "exact"
    archs: tuple = ("64x64",)
    weightings: tuple = ("unif",)
    seeds: tuple = DEFAULT_SEEDS
    discount: float = DEFAULT_DISCOUNT
    env_seed: int = None
    projection_steps: int = 2000
    fqi: dict = dataclasses.field(default_factory=dict)
    fit: dict = dataclasses.field(default_factory=dict)
    afm: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        for name in ("envs", "archs", "weightings", "seeds"):
            value = getattr(self, name)
            if isinstance(value, (str, int)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
            if not value:
                raise ConfigurationError(f"{name} must not be empty")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}")
        envs = tuple(parse_env_name(e, seed=0).canonical_name for e in self.envs)
        object.__setattr__(self, "envs", envs)
        object.__setattr__(self, "archs", tuple(ArchSpec.parse(a).name for a in self.archs))
        if self.algorithm == "replay":
            bad = [w for w in self.weightings if w not in REPLAY_OVERLAYS]
            if bad:
                raise ConfigurationError(f"unknown replay overlays {bad}; expected {REPLAY_OVERLAYS}")
        else:
            object.__setattr__(self, "weightings", tuple(WeightingKind(w).tag for w in self.weightings))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if any(s < 0 or s >= 2 ** 64 for s in self.seeds):
            raise ConfigurationError("seeds must be unsigned 64-bit integers")
        if not 0.0 < float(self.discount) < 1.0:
            raise ConfigurationError("discount must lie in (0, 1)")
        object.__setattr__(self, "discount", float(self.discount))
        if self.projection_steps < 0:
            raise ConfigurationError("projection_steps must be non-negative")
        for name, allowed in (("fqi", _FQI_SCALARS), ("fit", {f.name for f in dataclasses.fields(FitConfig)}),
                              ("afm", {f.name for f in dataclasses.fields(AFMConfig)})):
            section = dict(getattr(self, name))
            unknown = set(section) - allowed
            if unknown:
                raise ConfigurationError(f"unknown keys in [{name}]: {sorted(unknown)}")
            object.__setattr__(self, name, section)
        # build once so invalid values fail at load time
        self.fqi_config(self.archs[0], self.weightings[0], self.seeds[0])

    def fqi_config(self, arch, weighting, seed):
        fit = dict(self.fit)
        if "betas" in fit:
            fit["betas"] = tuple(fit["betas"])
        kwargs = dict(self.fqi)
        if self.algorithm == "replay":
            kwargs["overlay"] = weighting
        else:
            kwargs["weighting"] = WeightingKind(weighting, kwargs.get("explore_epsilon", 0.1))
        return FQIConfig(arch=ArchSpec.parse(arch), fit=FitConfig(**fit), afm=AFMConfig(**self.afm),
                         seed=int(seed), **kwargs)

    def cells(self):
        """Every (env, arch, weighting, seed) combination in a fixed order."""
        return [(e, a, w, s) for e in self.envs for a in self.archs
                for w in self.weightings for s in self.seeds]

    def canonical(self):
        """Plain-data form with every default filled in; the basis of the hash."""
        return {
            "algorithm": self.algorithm,
            "envs": list(self.envs),
            "archs": list(self.archs),
            "weightings": list(self.weightings),
            "seeds": list(self.seeds),
            "discount": self.discount,
            "env_seed": self.env_seed,
            "projection_steps": self.projection_steps,
            "fqi": _plain(self.fqi_config(self.archs[0], self.weightings[0], 0), drop=("seed", "arch", "weighting", "overlay")),
        }

    @property
    def hash(self):
        return config_hash(self.canonical())


def _plain(obj, drop=()):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.name not in drop}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float):
        return float(repr(obj))
    return obj


def config_hash(data):
    """First 16 hex digits of SHA-256 over canonical JSON (sorted keys, no spaces)."""
    text = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def from_dict(data):
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    if "envs" not in data:
        raise ConfigurationError("config needs an 'envs' list")
    return ExperimentConfig(**data)


def load_config(path, environ=None):
    """Read a TOML sweep file; ``QDIAG_SEED`` in ``environ`` replaces the seed list."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return apply_seed_override(from_dict(data), environ)


def apply_seed_override(cfg, environ=None):
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return cfg
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    return dataclasses.replace(cfg, seeds=(seed,))
