"""Experiment configuration: YAML files merged over per-experiment defaults.

A config file has the sections ``grid``, ``sequence``, ``weights``,
``transform``, ``horizon``, ``tolerances``, ``params``, ``output`` and the
scalars ``experiment`` and ``seed``. Every key is optional; missing keys
take the defaults of the chosen experiment. Unknown keys are errors.
"""

import copy
import hashlib
import json
import math

import numpy as np
import yaml

from ..lacunary import (
    LacunaryError,
    WeightSequence,
    geometric,
    increasing_sequence,
    perturbed_geometric,
    validate_lacunary,
)
from ..spectral import GridError, make_grid

EXPERIMENTS = (
    "l2_bound",
    "kernel_bounds",
    "cz_bounds",
    "cotlar",
    "weak_type",
    "weighted_lp",
    "bmo_check",
    "local_growth",
    "convergence",
    "lacunary_equiv",
)

SECTIONS = ("grid", "sequence", "weights", "transform", "horizon", "tolerances", "params", "output")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


BASE = {
    "grid": {"n": 1, "L": 64.0, "m": 1024},
    "sequence": {
        "type": "geometric",
        "lambda": 2.0,
        "j_min": -8,
        "j_max": 8,
        "base": 1.0,
        "amplitude": 0.3,
        "terms": None,
        "zero_index": 0,
    },
    "weights": {"type": "random", "value": 1.0, "scale": 1.0, "s": 1.0, "values": None},
    "transform": {"alpha": [0.5], "mode": "strict"},
    "horizon": {"M": [8], "rtol": 1e-6},
    "tolerances": {
        "spread": 50.0,
        "l2_slack": 1e-10,
        "residual": 1e-10,
        "oracle": 1e-6,
        "slope": 0.25,
        "golden_rtol": 1e-9,
        "eps_rel": 1e-14,
    },
    "params": {},
    "seed": 20240607,
    "output": {"dir": "out", "golden_dir": None, "cache_dir": None},
}

OVERRIDES = {
    "l2_bound": {
        "sequence": {"j_min": -10, "j_max": 10},
        "params": {"trials": 200, "bump_count": 6},
    },
    "kernel_bounds": {
        "transform": {"alpha": [0.3, 0.5, 0.75, 1.0]},
        "params": {
            "dims": [1, 2],
            "t_min": 0.01,
            "t_max": 10.0,
            "t_count": 7,
            "grid_1d": {"L": 512.0, "m": 65536},
            "grid_2d": {"L": 8.0, "m": 1024},
            "window": 0.25,
            "oracle_times": [0.5, 1.0, 4.0],
            "oracle_grid_1d": {"L": 256.0, "m": 16384},
            "oracle_grid_2d": {"L": 16.0, "m": 512},
            "oracle_samples": 4000,
        },
    },
    "cz_bounds": {
        "grid": {"L": 256.0, "m": 16384},
        "sequence": {"j_min": -3, "j_max": 12},
        "transform": {"alpha": [0.5, 0.75]},
        "params": {"center": 2, "weight_kinds": ["constant", "random"], "inner_cells": 4, "outer": 0.25},
    },
    "cotlar": {
        "sequence": {"j_min": -33, "j_max": 33},
        "horizon": {"M": [4, 8, 16, 32]},
        "tolerances": {"spread": 10.0},
        "params": {"trials": 20, "q": 2.0, "bump_count": 6, "window_mode": "inclusive"},
    },
    "weak_type": {
        "grid": {"L": 64.0, "m": 2048},
        "sequence": {"j_min": -40, "j_max": 40},
        "horizon": {"M": [4], "max": 32, "rtol": 1e-6},
        "params": {
            "betas": [0.0, -0.5],
            "spike_cells": [2, 4, 8, 16],
            "sigma_decades": 3.0,
            "sigma_count": 13,
        },
    },
    "weighted_lp": {
        "sequence": {"j_min": -16, "j_max": 16},
        "horizon": {"M": [12]},
        "params": {
            "exponents": [1.5, 2.0, 4.0],
            "beta_fractions": [-0.5, 0.0, 0.5],
            "random_fields": 4,
            "spike_cells": [2, 8, 32],
            "bump_count": 6,
        },
    },
    "bmo_check": {
        "sequence": {"j_min": -6, "j_max": 14},
        "weights": {"type": "random"},
        "params": {"field": "sign_sine", "center": 0, "max_length": 20},
    },
    "local_growth": {
        "grid": {"L": 8.0, "m": 131072},
        "sequence": {"type": "geometric", "lambda": 2.0, "j_min": -31, "j_max": 31},
        "weights": {"type": "power", "signs": "aligned"},
        "horizon": {"M": [30], "check_M": 25, "rtol": 1e-3},
        "tolerances": {"spread": 10.0, "slope": 0.2},
        "params": {
            "fields": ["annuli", "ball"],
            "annulus_period": 2,
            "cases": [
                {"p": 1.0, "s": 2.0},
                {"p": 2.0, "s": 0.51},
                {"p": "inf", "s": 0.0},
            ],
            "r_min_exp": 10,
            "r_max_exp": 1,
            "growth_p": 2.0,
            "growth_target": 0.5,
        },
    },
    "convergence": {
        "sequence": {"lambda": 2.0},
        "weights": {"type": "constant"},
        "transform": {"alpha": [0.25, 0.5, 0.75]},
        "params": {
            "field": "tent",
            "b_grid": {"L": 16.0, "m": 65536},
            "b_cuts": [4, 15],
            "b_M": 40,
            "a_grid": {"L": 4096.0, "m": 65536},
            "a_lambda": 1.4142135623730951,
            "a_M": 80,
            "a_min_scale": 4.0,
            "a_max_fraction": 0.0625,
            "fit_fraction": 0.6,
        },
    },
    "lacunary_equiv": {
        "grid": {"L": 64.0, "m": 512},
        "params": {"trials": 100, "max_terms": 7, "ratio_span": 4.0, "lambdas": [1.5, 2.0, 3.0]},
    },
}


def deep_merge(base, update):
    """Recursive dict merge; values in ``update`` win, dicts are merged."""
    out = copy.deepcopy(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and out.get(k):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def defaults(experiment):
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = deep_merge(BASE, OVERRIDES[experiment])
    cfg["experiment"] = experiment
    return cfg


def _check_keys(section, given, allowed):
    extra = sorted(set(given) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(extra)}")


def resolve(raw, experiment=None):
    """Merge a raw mapping over the defaults of its experiment and validate."""
    raw = dict(raw or {})
    exp = raw.pop("experiment", None)
    if experiment is not None and exp is not None and exp != experiment:
        raise ConfigError(f"config is for {exp!r}, asked to run {experiment!r}")
    exp = experiment or exp
    if exp is None:
        raise ConfigError("no experiment given")
    base = defaults(exp)
    _check_keys("config", raw, set(SECTIONS) | {"seed"})
    for sec in SECTIONS:
        if sec in raw and not isinstance(raw[sec], dict):
            raise ConfigError(f"section {sec} must be a mapping")
        if sec in raw and sec not in ("params",):
            _check_keys(sec, raw[sec], set(base[sec]) | _EXTRA_KEYS.get(sec, set()))
    if "params" in raw:
        _check_keys("params", raw["params"], base["params"])
    cfg = deep_merge(base, raw)
    validate(cfg)
    return cfg


_EXTRA_KEYS = {"weights": {"signs"}, "horizon": {"check_M", "max"}}


def load_config(path, experiment=None):
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return resolve(raw or {}, experiment)


def _as_float(x):
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        return math.inf
    return float(x)


def alphas(cfg):
    a = cfg["transform"]["alpha"]
    return [float(x) for x in (a if isinstance(a, (list, tuple)) else [a])]


def horizons(cfg):
    M = cfg["horizon"]["M"]
    return [int(x) for x in (M if isinstance(M, (list, tuple)) else [M])]


def build_grid(section):
    return make_grid(int(section.get("n", 1)), float(section["L"]), int(section["m"]))


def build_sequence(section):
    kind = section["type"]
    lam = float(section["lambda"])
    if kind == "geometric":
        return geometric(lam, int(section["j_min"]), int(section["j_max"]), float(section["base"]))
    if kind == "perturbed":
        return perturbed_geometric(lam, int(section["j_min"]), int(section["j_max"]), float(section["amplitude"]))
    if kind in ("explicit", "increasing"):
        terms = section["terms"]
        if not terms:
            raise ConfigError("explicit sequence needs terms")
        j_min = -int(section["zero_index"])
        if kind == "explicit":
            return validate_lacunary(terms, lam, j_min)
        return increasing_sequence(terms, j_min)
    raise ConfigError(f"unknown sequence type {kind!r}")


def build_weights(section, seq, rng, s=None, signs=None):
    kind = section["type"]
    n = len(seq)
    js = np.arange(seq.j_min, seq.j_max + 1)
    if kind == "constant":
        vals = np.full(n, float(section["value"]))
    elif kind == "zero":
        vals = np.zeros(n)
    elif kind == "random":
        vals = rng.uniform(-1, 1, n) * float(section["scale"])
    elif kind == "alternating":
        vals = float(section["value"]) * (-1.0) ** js
    elif kind == "power":
        exp = float(section["s"] if s is None else s)
        vals = (1.0 + np.abs(js)) ** (-exp)
        if signs is not None:
            vals = vals * signs
    elif kind == "explicit":
        vals = np.asarray(section["values"], dtype=float)
        if vals.shape != (n,):
            raise ConfigError(f"explicit weights need {n} values")
    else:
        raise ConfigError(f"unknown weight type {kind!r}")
    return WeightSequence(tuple(vals), seq.j_min)


def validate(cfg):
    """Raise :class:`ConfigError` on the first invalid value."""
    try:
        g = cfg["grid"]
        build_grid(g)
        seq = build_sequence(cfg["sequence"])
    except (GridError, LacunaryError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["weights"]["type"] not in ("constant", "zero", "random", "alternating", "power", "explicit"):
        raise ConfigError(f"unknown weight type {cfg['weights']['type']!r}")
    for a in alphas(cfg):
        if not 0 < a <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {a}")
    if cfg["transform"]["mode"] not in ("strict", "inclusive"):
        raise ConfigError("transform.mode must be strict or inclusive")
    for M in horizons(cfg):
        if M < 1:
            raise ConfigError("horizons must be positive")
        if cfg["experiment"] in ("cotlar", "weak_type", "weighted_lp", "local_growth"):
            if -M < seq.j_min or M + 1 > seq.j_max:
                raise ConfigError(f"horizon M={M} exceeds sequence indices {seq.j_min}..{seq.j_max}")
    for k, v in cfg["tolerances"].items():
        if not float(v) > 0:
            raise ConfigError(f"tolerance {k} must be positive")
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    return cfg


def config_hash(cfg):
    """sha256 of the canonical config, ignoring output locations."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    text = json.dumps(body, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def with_seed(cfg, seed):
    out = copy.deepcopy(cfg)
    out["seed"] = int(seed)
    validate(out)
    return out
