"""JSON run configuration: defaults, validation and sweep expansion.

A config is one flat JSON object. ``{"r": 1.5, "mu": 0.22}`` is complete;
everything else falls back to ``DEFAULTS``. An optional ``sweep`` object maps
a field name to a list of values, or a comma-joined group of names to a list
of equally long tuples that vary together; entries combine as a Cartesian
product.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
from pathlib import Path

from .fpe import DriftScheme, FpeConfig, InitialDensity
from .integrate import SimConfig
from .model import ModelParams, State
from .stable import StableNoiseSpec


class ConfigError(ValueError):
    pass


DEFAULTS = {
    # model
    "r": 1.5, "mu": 0.22, "c": 0.02, "E": 0.4, "C": 1.0, "k": 10.0,
    # noise
    "alpha1": 1.5, "sigma1": 0.1, "alpha2": 1.5, "sigma2": 0.1,
    # paths
    "dt": 0.01, "t_end": 300.0, "x0": 20.0, "y0": 10.0, "seed": 0,
    "clamp_nonnegative": False, "record_stride": 10, "n_traj": 100,
    "write_trajectories": True, "thin": 1,
    # phase portrait
    "initials": None,
    "portrait_x": [2.5, 10.0, 20.0, 30.0], "portrait_y": [2.5, 15.0, 30.0],
    "portrait_t_end": 600.0,
    # bifurcation curve
    "r_min": 0.01, "r_max": 2.5, "n_points": 250,
    # stationary density
    "x_min": 0.0, "x_max": 30.0, "y_min": 0.0, "y_max": 60.0, "nx": 150, "ny": 150,
    "fp_dt": None, "tol": 1e-4, "max_steps": 500_000,
    "initial_density": InitialDensity.GAUSSIAN_BUMP_AT_ATTRACTOR.value,
    "drift_scheme": DriftScheme.UPWIND.value,
}

_INT_KEYS = {"seed", "record_stride", "n_traj", "thin", "n_points", "nx", "ny", "max_steps"}
_BOOL_KEYS = {"clamp_nonnegative", "write_trajectories"}


def load_config(path) -> dict:
    """Read a config file. A run manifest is accepted too; its recorded
    config is used, which makes manifests replayable."""
    try:
        with open(Path(path)) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "subcommand" in raw and "config" in raw:
        raw = raw["config"]
    return raw


def resolve(raw: dict, seed: int | None = None) -> dict:
    """Fill defaults and type-check. The ``sweep`` block is kept verbatim."""
    raw = copy.deepcopy(raw)
    sweep = raw.pop("sweep", None)
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = {**copy.deepcopy(DEFAULTS), **raw}
    if seed is not None:
        cfg["seed"] = seed
    for key in DEFAULTS:
        cfg[key] = _coerce(key, cfg[key])
    if sweep is not None:
        cfg["sweep"] = _check_sweep(sweep)
    return cfg


def _coerce(key, value):
    if value is None:
        return None
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if key in ("portrait_x", "portrait_y"):
        return [float(v) for v in value]
    if key == "initials":
        try:
            return [[float(a), float(b)] for a, b in value]
        except (TypeError, ValueError) as exc:
            raise ConfigError("initials must be a list of [x, y] pairs") from exc
    if key == "initial_density":
        try:
            return InitialDensity(value).value
        except ValueError as exc:
            raise ConfigError(f"initial_density must be one of {[m.value for m in InitialDensity]}") from exc
    if key == "drift_scheme":
        try:
            return DriftScheme(value).value
        except ValueError as exc:
            raise ConfigError(f"drift_scheme must be one of {[m.value for m in DriftScheme]}") from exc
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    value = float(value)
    if math.isnan(value):
        raise ConfigError(f"{key} is NaN")
    return value


def _check_sweep(sweep) -> dict:
    if not isinstance(sweep, dict) or not sweep:
        raise ConfigError("sweep must be a non-empty object")
    for key, values in sweep.items():
        names = key.split(",")
        for name in names:
            if name not in DEFAULTS or name in ("initials", "portrait_x", "portrait_y", "drift_scheme",
                                                "initial_density"):
                raise ConfigError(f"cannot sweep over {name!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep entry {key!r} needs a non-empty list")
        if len(names) > 1 and not all(isinstance(v, list) and len(v) == len(names) for v in values):
            raise ConfigError(f"sweep group {key!r} needs lists of {len(names)} values")
    return sweep


def expand_sweep(cfg: dict) -> list[dict]:
    """One resolved config per sweep point (just ``cfg`` without a sweep)."""
    sweep = cfg.get("sweep")
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    if not sweep:
        return [base]
    axes = []
    for key, values in sweep.items():
        names = key.split(",")
        axes.append([dict(zip(names, v if len(names) > 1 else [v])) for v in values])
    points = []
    for combo in itertools.product(*axes):
        point = dict(base)
        for assignment in combo:
            for name, value in assignment.items():
                point[name] = _coerce(name, value)
        points.append(point)
    return points


def model_params(cfg: dict) -> ModelParams:
    try:
        return ModelParams(cfg["r"], cfg["mu"], cfg["c"], cfg["E"], cfg["C"], cfg["k"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def sim_config(cfg: dict) -> SimConfig:
    try:
        return SimConfig(
            params=model_params(cfg),
            noise_x=StableNoiseSpec(cfg["alpha1"], cfg["sigma1"]),
            noise_y=StableNoiseSpec(cfg["alpha2"], cfg["sigma2"]),
            dt=cfg["dt"],
            t_end=cfg["t_end"],
            initial=State(cfg["x0"], cfg["y0"]),
            seed=cfg["seed"],
            clamp_nonnegative=cfg["clamp_nonnegative"],
            record_stride=cfg["record_stride"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def fpe_config(cfg: dict) -> FpeConfig:
    try:
        return FpeConfig(
            params=model_params(cfg),
            noise_x=StableNoiseSpec(cfg["alpha1"], cfg["sigma1"]),
            noise_y=StableNoiseSpec(cfg["alpha2"], cfg["sigma2"]),
            x_min=cfg["x_min"], x_max=cfg["x_max"], y_min=cfg["y_min"], y_max=cfg["y_max"],
            nx=cfg["nx"], ny=cfg["ny"],
            dt=cfg["fp_dt"], tol=cfg["tol"], max_steps=cfg["max_steps"],
            initial=cfg["initial_density"],
            drift_scheme=cfg["drift_scheme"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def portrait_initials(cfg: dict) -> list[State]:
    if cfg["initials"]:
        return [State(x, y) for x, y in cfg["initials"]]
    return [State(x, y) for x in cfg["portrait_x"] for y in cfg["portrait_y"]]
