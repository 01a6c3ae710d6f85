"""Strict JSON scenario files for the command-line tools.

A scenario fully describes one run: plant parameters, initial state,
controller, disturbance schedule and integration options.  Validation
is strict — unknown keys anywhere are errors, so a typo cannot
silently fall back to a default — and happens completely before any
simulation starts.  Angles are written in degrees in the files (they
are human-edited); everything internal stays in radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .control import (
    DampingGains,
    FilteredDampingController,
    IdealDampingController,
    PassiveController,
    cutoff_frequency,
)
from .dynamics import DEFAULT_PARAMS, PendulumParams, PlanarState
from .simulate import DisturbanceEvent, DisturbanceSchedule, GyroNoise
from .spatial import SpatialState

__all__ = ["ConfigError", "Scenario", "load_scenario"]


class ConfigError(ValueError):
    """Configuration rejected; ``field`` holds the offending key path."""

    def __init__(self, fieldpath: str, reason: str):
        super().__init__(f"{fieldpath}: {reason}")
        self.field = fieldpath


def _check_keys(obj: dict, allowed, path: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0],
                          "unknown key")


def _number(obj: dict, key: str, path: str, default=None, *,
            minimum=None, strict_min=False, allow_none=False):
    if key not in obj:
        if default is None and not allow_none:
            raise ConfigError(f"{path}.{key}", "required value missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", "must be a number")
    v = float(v)
    if minimum is not None:
        if strict_min and v <= minimum:
            raise ConfigError(f"{path}.{key}", f"must be > {minimum}")
        if not strict_min and v < minimum:
            raise ConfigError(f"{path}.{key}", f"must be >= {minimum}")
    return v


def _vector3(value, path: str):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value), 0.0, 0.0)
    if (isinstance(value, (list, tuple)) and len(value) == 3
            and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                    for x in value)):
        return tuple(float(x) for x in value)
    raise ConfigError(path, "must be a number or a 3-element list")


_PARAM_KEYS = ("m1", "m2", "l1", "l2", "g", "d1", "d2", "jz")


def _build_params(obj: dict, path: str = "params") -> PendulumParams:
    _check_keys(obj, _PARAM_KEYS, path)
    merged = {k: getattr(DEFAULT_PARAMS, k) for k in _PARAM_KEYS}
    for k in obj:
        merged[k] = _number(obj, k, path)
    try:
        return PendulumParams(**merged)
    except ValueError as exc:
        raise ConfigError(f"{path}.{_failing_param(merged)}", str(exc)) from exc


def _failing_param(merged: dict) -> str:
    for name in ("m1", "m2", "l1", "l2", "g", "jz"):
        if merged[name] <= 0.0:
            return name
    for name in ("d1", "d2"):
        if merged[name] < 0.0:
            return name
    return "params"


_PLANAR_INITIAL = ("q1_deg", "q2_deg", "q1dot", "q2dot")
_SPATIAL_INITIAL = ("phi1x_deg", "phi1y_deg", "phi2x_deg", "phi2y_deg",
                    "psi_deg", "phi1xdot", "phi1ydot", "phi2xdot", "phi2ydot",
                    "psidot")


def _build_initial(obj: dict, model: str, path: str = "initial"):
    if model == "planar":
        _check_keys(obj, _PLANAR_INITIAL, path)
        return PlanarState(
            q1=math.radians(_number(obj, "q1_deg", path, 0.0)),
            q2=math.radians(_number(obj, "q2_deg", path, 0.0)),
            q1dot=_number(obj, "q1dot", path, 0.0),
            q2dot=_number(obj, "q2dot", path, 0.0))
    _check_keys(obj, _SPATIAL_INITIAL, path)
    vals = {}
    for key in _SPATIAL_INITIAL:
        v = _number(obj, key, path, 0.0)
        name = key[:-4] if key.endswith("_deg") else key
        vals[name] = math.radians(v) if key.endswith("_deg") else v
    return SpatialState(**vals)


_CONTROLLER_KEYS = ("type", "gains", "tau", "saturation")
_GAIN_KEYS = ("kv", "kw", "kpsi")


def _build_gains(obj: dict, path: str) -> DampingGains:
    _check_keys(obj, _GAIN_KEYS, path)
    defaults = DampingGains()
    try:
        return DampingGains(
            kv=_number(obj, "kv", path, defaults.kv),
            kw=_number(obj, "kw", path, defaults.kw),
            kpsi=_number(obj, "kpsi", path, defaults.kpsi))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _build_tau(value, params: PendulumParams, path: str) -> float:
    """Filter time constant.

    ``"auto"`` places the cutoff midway between the two pendulum modes;
    a number is an explicit time constant in seconds; an object
    ``{"cutoff_hz": f}`` states a measured cutoff frequency instead.
    """
    if value == "auto":
        return cutoff_frequency(params)[1]
    if isinstance(value, dict):
        _check_keys(value, ("cutoff_hz",), path)
        hz = _number(value, "cutoff_hz", path, minimum=0.0, strict_min=True)
        return 1.0 / (2.0 * math.pi * hz)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value <= 0.0:
            raise ConfigError(path, "must be > 0")
        return float(value)
    raise ConfigError(
        path, 'must be "auto", a positive number, or {"cutoff_hz": f}')


def _build_controller(obj: dict, params: PendulumParams,
                      path: str = "controller"):
    _check_keys(obj, _CONTROLLER_KEYS, path)
    kind = obj.get("type", "proposed")
    if kind not in ("proposed", "ideal", "passive"):
        raise ConfigError(f"{path}.type",
                          'must be "proposed", "ideal" or "passive"')
    gains = _build_gains(obj.get("gains", {}), f"{path}.gains")
    saturation = None
    if "saturation" in obj:
        sat = obj["saturation"]
        _check_keys(sat, ("force", "torque"), f"{path}.saturation")
        saturation = (_number(sat, "force", f"{path}.saturation",
                              minimum=0.0, strict_min=True),
                      _number(sat, "torque", f"{path}.saturation",
                              minimum=0.0, strict_min=True))
    if kind == "passive":
        return PassiveController()
    if kind == "ideal":
        return IdealDampingController(gains, saturation=saturation)
    tau = _build_tau(obj.get("tau", "auto"), params, f"{path}.tau")
    return FilteredDampingController(gains, params, tau=tau,
                                     saturation=saturation)


_EVENT_KEYS = ("kind", "start", "force", "torque", "duration", "frequency",
               "count", "period")
_EVENT_KINDS = ("impulse", "step", "sinusoid", "jerk_train")


def _build_event(obj: dict, model: str, path: str) -> DisturbanceEvent:
    _check_keys(obj, _EVENT_KEYS, path)
    kind = obj.get("kind")
    if kind not in _EVENT_KINDS:
        raise ConfigError(f"{path}.kind", f"must be one of {_EVENT_KINDS}")
    if model == "planar":
        force = _number(obj, "force", path, 0.0)
        torque = _number(obj, "torque", path, 0.0)
    else:
        force = _vector3(obj.get("force", 0.0), f"{path}.force")
        torque = _vector3(obj.get("torque", 0.0), f"{path}.torque")
    count = obj.get("count", 1)
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise ConfigError(f"{path}.count", "must be a positive integer")
    return DisturbanceEvent(
        kind=kind,
        start=_number(obj, "start", path, 0.0, minimum=0.0),
        force=force, torque=torque,
        duration=_number(obj, "duration", path, 0.0, minimum=0.0),
        frequency=_number(obj, "frequency", path, 0.0, minimum=0.0),
        count=count,
        period=_number(obj, "period", path, 0.0, minimum=0.0))


_SIM_KEYS = ("duration", "dt", "control_rate", "seed", "noise")
_NOISE_KEYS = ("enabled", "density_deg")


def _build_noise(obj: dict, path: str) -> GyroNoise:
    _check_keys(obj, _NOISE_KEYS, path)
    enabled = obj.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ConfigError(f"{path}.enabled", "must be true or false")
    return GyroNoise(
        density_deg=_number(obj, "density_deg", path, 0.009,
                            minimum=0.0),
        enabled=enabled)


@dataclass
class Scenario:
    """A validated run description, ready to execute."""

    model: str
    params: PendulumParams
    initial: Union[PlanarState, SpatialState]
    controller_spec: dict
    disturbance: DisturbanceSchedule
    duration: float
    dt: float
    control_rate: float
    seed: int
    noise: GyroNoise
    extras: dict = field(default_factory=dict)  # subcommand-specific blocks

    def make_controller(self):
        """Fresh controller instance (filter state included)."""
        return _build_controller(self.controller_spec, self.params)

    def sim_kwargs(self) -> dict:
        return dict(duration=self.duration, dt=self.dt,
                    control_rate=self.control_rate,
                    disturbance=self.disturbance, noise=self.noise,
                    seed=self.seed)


_TOP_KEYS = ("model", "params", "initial", "controller", "disturbance", "sim")


def scenario_from_dict(cfg: dict, *, extra_blocks=()) -> Scenario:
    """Validate a configuration mapping into a `Scenario`.

    ``extra_blocks`` names additional top-level sections a subcommand
    understands (for example ``synthesis`` or ``grid``); they are key-
    checked by the subcommand itself and carried in ``extras``.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("", "configuration root must be an object")
    _check_keys(cfg, _TOP_KEYS + tuple(extra_blocks), "")
    model = cfg.get("model", "planar")
    if model not in ("planar", "spatial"):
        raise ConfigError("model", 'must be "planar" or "spatial"')

    params = _build_params(cfg.get("params", {}))
    initial = _build_initial(cfg.get("initial", {}), model)
    controller_spec = cfg.get("controller", {})
    _build_controller(controller_spec, params)  # validate eagerly

    events_cfg = cfg.get("disturbance", [])
    if not isinstance(events_cfg, list):
        raise ConfigError("disturbance", "must be a list of events")
    events = [_build_event(ev, model, f"disturbance[{i}]")
              for i, ev in enumerate(events_cfg)]

    sim = cfg.get("sim", {})
    _check_keys(sim, _SIM_KEYS, "sim")
    seed = sim.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("sim.seed", "must be a non-negative integer")

    return Scenario(
        model=model,
        params=params,
        initial=initial,
        controller_spec=controller_spec,
        disturbance=DisturbanceSchedule(events),
        duration=_number(sim, "duration", "sim", 30.0, minimum=0.0,
                         strict_min=True),
        dt=_number(sim, "dt", "sim", 1e-3, minimum=0.0, strict_min=True),
        control_rate=_number(sim, "control_rate", "sim", 200.0,
                             minimum=0.0, strict_min=True),
        seed=seed,
        noise=_build_noise(sim.get("noise", {}), "sim.noise"),
        extras={k: cfg[k] for k in extra_blocks if k in cfg})


def load_scenario(path, *, extra_blocks=()) -> Scenario:
    """Read and validate a JSON scenario file."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON ({exc})") from exc
    return scenario_from_dict(cfg, extra_blocks=extra_blocks)
