"""Experiment configuration: YAML files validated field by field.

A config is a nested mapping. Unknown keys and out-of-range values are
collected into one :class:`ConfigurationError` whose message lists every
offending field by its dotted path, so a user fixes a file in one pass.
See ``configs/README.md`` for the schema.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .errors import ConfigurationError

__all__ = ["load_config", "validate_config", "config_hash", "DEFAULTS"]

_TANK = {
    "model": "tank",
    "seed": 0,
    "state_kernel": {"family": "wendland", "n": 1, "k": 1, "sigma": 1.0},
    "policy_kernel": {"sigma": 0.25},
    "sampling": {"n_x": 21, "n_alpha": 21, "x_range": [-2.0, 2.0], "alpha_range": [-1.0, 1.0]},
    "fit": {"method": "kernel_edmd", "jitter": 0.0},
    "rrr": {"rank": 20, "beta_factor": 0.01},
    "test": {"n_x": 41, "n_alpha": 41, "horizons": [1, 2, 4, 8, 16, 32, 64], "readout": "successors"},
    "cost": {"gamma": 0.95, "horizon": 30, "state_weight": 1.0, "action_weight": 1.0, "state_index": 0},
    "trajectories": {"x0": [-2.0, 2.0], "alphas": [-1.0, -0.5, 0.0, 0.5, 1.0], "horizon": 40},
    "filldist": {"n_x": 401, "n_alpha": 201, "policy_metric": 1.0},
    "bounds": {
        "m": [100, 1000, 10000, 100000, 1000000],
        "delta": 0.05,
        "beta_reg": 0.01,
        "rank": 20,
        "lipschitz": 2.0,
        "c_eta": 0.1,
        "c_Q": 1.0,
        "c_R": 1.0,
        "gamma": 0.2,
        "horizons": [0, 1, 2, 5, 10, 30],
    },
    "output": {"dir": "runs/tank"},
}

_WO = {
    "model": "williams_otto",
    "seed": 0,
    "state_kernel": {"family": "wendland", "n": 1, "k": 1, "sigma": 9.0},
    "policy_kernel": {"sigma": 1.0},
    "sampling": {
        "m": 1000,
        "duration": 14400.0,
        "record_interval": 5.0,
        "amplitude": 0.5,
        "alpha_range": [-2.0, 0.0],
        "scale_rule": "std",
    },
    "simulator": {"substep": 1.0, "sampling_interval": 20.0},
    "fit": {"method": "kernel_edmd", "jitter": None},
    "rrr": None,
    "test": {"m": 250, "seed_offset": 1000, "horizons": [1, 4, 8, 16, 32], "coordinates": [5], "readout": "successors"},
    "cost": {"gamma": 0.95, "horizon": 32, "state_weight": 25.0, "action_weight": 1.0, "state_index": 5},
    "disturbance": {
        "log10_k1": [-2.0, -1.0, 0.0],
        "log10_k2": [-2.0, -1.0, 0.0],
        "experiments": 2,
        "horizon": 250,
        "amplitude": 0.25,
    },
    "filldist": {"candidates": 2000, "policy_metric": 1.0},
    "bounds": copy.deepcopy(_TANK["bounds"]) | {"m": [1000, 10000, 100000, 1000000]},
    "output": {"dir": "runs/williams_otto"},
}

DEFAULTS = {"tank": _TANK, "williams_otto": _WO}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


class _Checker:
    def __init__(self, cfg):
        self.cfg = cfg
        self.errors: list[str] = []

    def get(self, path):
        node = self.cfg
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                return None
            node = node[part]
        return node

    def fail(self, path, msg):
        self.errors.append(f"{path}: {msg}")

    def number(self, path, lo=None, hi=None, lo_open=False, integer=False, optional=False):
        v = self.get(path)
        if v is None:
            if not optional:
                self.fail(path, "is required")
            return
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
            self.fail(path, f"must be {'an integer' if integer else 'a number'}, got {v!r}")
            return
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            self.fail(path, f"must be <= {hi}, got {v}")

    def choice(self, path, options):
        v = self.get(path)
        if v not in options:
            self.fail(path, f"must be one of {sorted(options)}, got {v!r}")

    def interval(self, path):
        v = self.get(path)
        if not (isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v) and v[0] < v[1]):
            self.fail(path, f"must be a list [lo, hi] with lo < hi, got {v!r}")

    def int_list(self, path, lo=0):
        v = self.get(path)
        if not (isinstance(v, list) and v and all(isinstance(t, int) and not isinstance(t, bool) and t >= lo for t in v)):
            self.fail(path, f"must be a nonempty list of integers >= {lo}, got {v!r}")

    def num_list(self, path):
        v = self.get(path)
        if not (isinstance(v, list) and v and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v)):
            self.fail(path, f"must be a nonempty list of numbers, got {v!r}")

    def unknown(self, defaults, node=None, prefix=""):
        node = self.cfg if node is None else node
        for key, value in node.items():
            path = f"{prefix}{key}"
            if key not in defaults:
                self.fail(path, "unknown field")
            elif isinstance(value, dict) and isinstance(defaults[key], dict):
                self.unknown(defaults[key], value, path + ".")


def validate_config(raw: dict) -> dict:
    """Merge ``raw`` over the model defaults and validate every field."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    model = raw.get("model")
    if model not in DEFAULTS:
        raise ConfigurationError(f"model: must be one of {sorted(DEFAULTS)}, got {model!r}")
    cfg = _merge(DEFAULTS[model], raw)
    c = _Checker(cfg)
    c.unknown(DEFAULTS[model], raw)
    c.number("seed", lo=0, integer=True)
    c.choice("state_kernel.family", {"wendland", "gaussian"})
    c.number("state_kernel.sigma", lo=0, lo_open=True)
    if cfg["state_kernel"].get("family") == "wendland":
        c.number("state_kernel.n", lo=1, integer=True)
        c.number("state_kernel.k", lo=0, integer=True)
    c.number("policy_kernel.sigma", lo=0, lo_open=True)
    c.choice("fit.method", {"kernel_edmd", "rrr"})
    if cfg["fit"].get("method") == "rrr":
        c.number("fit.rank", lo=1, integer=True)
        if c.get("fit.beta") is None:
            c.number("fit.beta_factor", lo=0, lo_open=True)
        else:
            c.number("fit.beta", lo=0, lo_open=True)
    else:
        c.number("fit.jitter", lo=0, optional=True)
    if cfg.get("rrr") is not None:
        c.number("rrr.rank", lo=1, integer=True)
        c.number("rrr.beta_factor", lo=0, lo_open=True)
    c.int_list("test.horizons")
    c.choice("test.readout", {"successors", "samples"})
    c.number("cost.gamma", lo=0, hi=1)
    c.number("cost.horizon", lo=0, integer=True)
    c.number("cost.state_weight", lo=0)
    c.number("cost.action_weight", lo=0)
    c.number("filldist.policy_metric", lo=0)
    c.int_list("bounds.m", lo=1)
    c.number("bounds.delta", lo=0, hi=1, lo_open=True)
    c.number("bounds.beta_reg", lo=0)
    c.number("bounds.rank", lo=1, integer=True)
    c.number("bounds.lipschitz", lo=0)
    c.number("bounds.c_eta", lo=0)
    c.number("bounds.c_Q", lo=0)
    c.number("bounds.c_R", lo=0)
    c.number("bounds.gamma", lo=0, hi=1)
    c.int_list("bounds.horizons")
    if model == "tank":
        for key in ("n_x", "n_alpha"):
            c.number(f"sampling.{key}", lo=2, integer=True)
            c.number(f"test.{key}", lo=2, integer=True)
            c.number(f"filldist.{key}", lo=2, integer=True)
        c.interval("sampling.x_range")
        c.interval("sampling.alpha_range")
        c.number("cost.state_index", lo=0, hi=0, integer=True)
        c.num_list("trajectories.x0")
        c.num_list("trajectories.alphas")
        c.number("trajectories.horizon", lo=1, integer=True)
    else:
        c.number("sampling.m", lo=1, integer=True)
        c.number("sampling.duration", lo=0, lo_open=True)
        c.number("sampling.record_interval", lo=0, lo_open=True)
        c.number("sampling.amplitude", lo=0, hi=1)
        c.interval("sampling.alpha_range")
        c.choice("sampling.scale_rule", {"none", "std", "stderr"})
        c.number("simulator.substep", lo=0, lo_open=True)
        c.number("simulator.sampling_interval", lo=0, lo_open=True)
        c.number("test.m", lo=1, integer=True)
        c.number("test.seed_offset", lo=0, integer=True)
        c.int_list("test.coordinates")
        if isinstance(c.get("test.coordinates"), list) and any(
            isinstance(j, int) and j > 5 for j in c.get("test.coordinates")
        ):
            c.fail("test.coordinates", "state indices must lie in [0, 5]")
        c.number("cost.state_index", lo=0, hi=5, integer=True)
        c.num_list("disturbance.log10_k1")
        c.num_list("disturbance.log10_k2")
        c.number("disturbance.experiments", lo=1, integer=True)
        c.number("disturbance.horizon", lo=1, integer=True)
        c.number("disturbance.amplitude", lo=0, hi=1)
        c.number("filldist.candidates", lo=1, integer=True)
    if not isinstance(c.get("output.dir"), str):
        c.fail("output.dir", "must be a path string")
    if c.errors:
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(c.errors))
    return cfg


def load_config(path, seed: int | None = None) -> dict:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    raw = raw or {}
    if seed is not None:
        raw["seed"] = seed
    return validate_config(raw)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form, stable across runs and platforms."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
