"""Scenario configuration files and bundled presets.

A configuration is a UTF-8 YAML mapping. Top-level keys::

    name            str, default: the system name
    system          pendulum | wheel                      (required)
    modes           list of run modes, default: all four
    T               sampling period, default 0.01
    steps           number of steps, default 2000
    x0              initial state                          (required)
    theta_hat0      initial estimator state                (required)
    true_params     true parameter vector                  (required)
    nominal_params  parameter vector used by non_adaptive  (required)
    plant           pendulum: m, gravity
                    wheel: m, length, gravity
    design          pendulum: k_p, q_star, K_v
                    wheel: a1, a2, a3, k1, K_v
    estimator       c (required), alpha, delta, P, theta_min, theta_max,
                    c_policy (constant | formula), c_scale
    sampler         state_box, theta_box, count, seed
    check           pendulum: param_rel_tol, position_tol
                    wheel: param_rel_tol, state_tol

Unknown keys are rejected. :func:`resolve_config` fills every default and
returns the fully resolved mapping alongside the scenario objects; dumping
that mapping back to YAML and parsing it again gives the same result.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .conditions import DomainSampler
from .estimator import EstimatorGains
from .exceptions import ConfigError, ContractError, DomainError
from .simulation import MODES, SYSTEMS, ScenarioConfig
from .systems import GRAVITY, PendulumParams, WheelParams

log = logging.getLogger(__name__)

REQUIRED = ("system", "x0", "theta_hat0", "true_params", "nominal_params", "estimator.c")

_TOP = {
    "name", "system", "modes", "T", "steps", "x0", "theta_hat0", "true_params",
    "nominal_params", "plant", "design", "estimator", "sampler", "check",
}
_PLANT = {"pendulum": {"m": 1.0, "gravity": GRAVITY},
          "wheel": {"m": 1.0, "length": 1.0, "gravity": GRAVITY}}
_DESIGN = {
    "pendulum": {"k_p": 40.0, "q_star": 2.0, "K_v": 5.0},
    "wheel": {"a1": 2.0, "a2": -3.0, "a3": 5.0, "k1": 0.214, "K_v": 10.0},
}
_CHECK = {
    "pendulum": {"param_rel_tol": 0.02, "position_tol": 0.01},
    "wheel": {"param_rel_tol": 0.05, "state_tol": 0.02},
}
_SAMPLER = {
    "pendulum": {"state_box": [[-math.pi, math.pi], [-3.0, 3.0]], "theta_box": [[0.5, 5.0]]},
    "wheel": {
        "state_box": [[-math.pi, math.pi], [-10.0, 10.0], [-4.0, 4.0], [-4.0, 4.0]],
        "theta_box": [[0.05, 0.3], [0.05, 0.3]],
    },
}
_ESTIMATOR_KEYS = {"c", "alpha", "delta", "P", "theta_min", "theta_max", "c_policy", "c_scale"}

PRESETS = {
    "pendulum-4.1.2": {
        "name": "pendulum-4.1.2",
        "system": "pendulum",
        "T": 0.01,
        "steps": 2000,
        "x0": [0.7, 0.5],
        "theta_hat0": [0.01],
        "true_params": [2.0],
        "nominal_params": [4.0],
        "plant": {"m": 1.0, "gravity": GRAVITY},
        "design": {"k_p": 40.0, "q_star": 2.0, "K_v": 5.0},
        "estimator": {"c": [100.0], "alpha": 2.0},
    },
    "wheel-4.2.2": {
        "name": "wheel-4.2.2",
        "system": "wheel",
        "T": 0.01,
        "steps": 2000,
        "x0": [2.0, 0.0, 0.0, 0.0],
        "theta_hat0": [0.0, 0.0],
        "true_params": [0.15, 0.08],
        "nominal_params": [0.1, 0.1],
        "plant": {"m": 1.0, "length": 1.0, "gravity": GRAVITY},
        "design": {"a1": 2.0, "a2": -3.0, "a3": 5.0, "k1": 0.214, "K_v": 10.0},
        "estimator": {"c": [6.0, 2.0], "alpha": 1.0},
    },
}


@dataclass
class ResolvedConfig:
    """A parsed configuration.

    ``data`` is the complete mapping with every default filled in,
    ``defaults`` lists the dotted keys that came from defaults and
    ``warnings`` holds soft-constraint messages.
    """

    data: dict
    configs: list
    defaults: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def check(self):
        return self.data["check"]

    def dump(self):
        """The resolved mapping as YAML text."""
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=None)


def _reject_unknown(section, allowed, where):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        label = f" in {where}" if where else ""
        raise ConfigError(f"unknown key(s){label}: {', '.join(unknown)}; allowed: {', '.join(sorted(allowed))}")


def _number(value, key):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{key} must be finite, got {value!r}")
    return out


def _vector(value, key, size=None):
    if not isinstance(value, (list, tuple)):
        value = [value]
    out = [_number(v, f"{key}[{i}]") for i, v in enumerate(value)]
    if size is not None and len(out) != size:
        raise ConfigError(f"{key} must have {size} entries, got {len(out)}")
    return out


def _matrix(value, key, rows=None, cols=None):
    if not isinstance(value, (list, tuple)) or not all(isinstance(r, (list, tuple)) for r in value):
        raise ConfigError(f"{key} must be a list of rows")
    out = [_vector(r, f"{key}[{i}]", cols) for i, r in enumerate(value)]
    if rows is not None and len(out) != rows:
        raise ConfigError(f"{key} must have {rows} rows, got {len(out)}")
    return out


def _section(raw, key, defaults, path, applied):
    given = raw.get(key) or {}
    if not isinstance(given, dict):
        raise ConfigError(f"{key} must be a mapping")
    _reject_unknown(given, defaults, key)
    out = {}
    for name, default in defaults.items():
        if name in given:
            out[name] = _number(given[name], f"{key}.{name}")
        else:
            out[name] = default
            applied.append(f"{path}{key}.{name}")
    return out


def _load(source):
    """Mapping from a preset name, a path or an already loaded dict."""
    if isinstance(source, dict):
        return dict(source)
    if str(source) in PRESETS:
        return dict(PRESETS[str(source)])
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML: {exc}") from None
    if raw is None:
        raise ConfigError(f"{path}: empty config; required keys: {', '.join(REQUIRED)}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def resolve_config(source, seed=None):
    """Parse and fully resolve a configuration.

    Parameters
    ----------
    source : str, Path or dict
        A preset name, a YAML file or a mapping with the file's structure.
    seed : int, optional
        Overrides ``sampler.seed``.

    Returns
    -------
    ResolvedConfig
    """
    raw = _load(source)
    _reject_unknown(raw, _TOP, "")
    missing = [k for k in REQUIRED if k.split(".")[0] not in raw]
    est_raw = raw.get("estimator") or {}
    if not isinstance(est_raw, dict):
        raise ConfigError("estimator must be a mapping")
    if "estimator" in raw and "c" not in est_raw:
        missing.append("estimator.c")
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}; required keys: {', '.join(REQUIRED)}")

    system = raw["system"]
    if system not in SYSTEMS:
        raise ConfigError(f"system must be one of {', '.join(SYSTEMS)}, got {system!r}")
    s = 1 if system == "pendulum" else 2
    n = 2 * s
    applied = []

    def default(key, value):
        if key in raw:
            return raw[key]
        applied.append(key)
        return value

    data = {"system": system, "name": str(default("name", system))}
    modes = default("modes", list(MODES))
    if not isinstance(modes, list) or not modes:
        raise ConfigError("modes must be a non-empty list")
    bad = [m for m in modes if m not in MODES]
    if bad or len(set(modes)) != len(modes):
        raise ConfigError(f"modes must be distinct entries of {', '.join(MODES)}, got {modes}")
    data["modes"] = list(modes)
    data["T"] = _number(default("T", 0.01), "T")
    steps = default("steps", 2000)
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise ConfigError(f"steps must be an integer, got {steps!r}")
    data["steps"] = steps
    data["x0"] = _vector(raw["x0"], "x0", n)
    data["theta_hat0"] = _vector(raw["theta_hat0"], "theta_hat0", s)
    data["true_params"] = _vector(raw["true_params"], "true_params", s)
    data["nominal_params"] = _vector(raw["nominal_params"], "nominal_params", s)
    data["plant"] = _section(raw, "plant", _PLANT[system], "", applied)
    data["design"] = _section(raw, "design", _DESIGN[system], "", applied)
    data["check"] = _section(raw, "check", _CHECK[system], "", applied)

    _reject_unknown(est_raw, _ESTIMATOR_KEYS, "estimator")
    est = {"c": _vector(est_raw["c"], "estimator.c", s)}
    for key, value in (("alpha", 1.0), ("delta", 1e-3), ("c_scale", 1.0)):
        if key in est_raw:
            est[key] = _number(est_raw[key], f"estimator.{key}")
        else:
            est[key] = value
            applied.append(f"estimator.{key}")
    if "P" in est_raw:
        est["P"] = _matrix(est_raw["P"], "estimator.P", s, s)
    else:
        est["P"] = [[1.0 if i == j else 0.0 for j in range(s)] for i in range(s)]
        applied.append("estimator.P")
    for key, value in (("theta_min", 0.01), ("theta_max", 100.0)):
        if key in est_raw:
            est[key] = _vector(est_raw[key], f"estimator.{key}", s)
        else:
            est[key] = [value] * s
            applied.append(f"estimator.{key}")
    policy = est_raw.get("c_policy", "constant")
    if "c_policy" not in est_raw:
        applied.append("estimator.c_policy")
    if policy not in ("constant", "formula"):
        raise ConfigError(f"estimator.c_policy must be constant or formula, got {policy!r}")
    est["c_policy"] = policy
    data["estimator"] = est

    smp_raw = raw.get("sampler") or {}
    if not isinstance(smp_raw, dict):
        raise ConfigError("sampler must be a mapping")
    _reject_unknown(smp_raw, {"state_box", "theta_box", "count", "seed"}, "sampler")
    smp = {}
    for key, rows in (("state_box", n), ("theta_box", s)):
        if key in smp_raw:
            smp[key] = _matrix(smp_raw[key], f"sampler.{key}", rows, 2)
        else:
            smp[key] = [list(r) for r in _SAMPLER[system][key]]
            applied.append(f"sampler.{key}")
    for key, value in (("count", 10_000), ("seed", 0)):
        v = smp_raw.get(key, value)
        if key not in smp_raw:
            applied.append(f"sampler.{key}")
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"sampler.{key} must be an integer, got {v!r}")
        smp[key] = v
    if seed is not None:
        smp["seed"] = int(seed)
    data["sampler"] = smp

    configs, warnings = _build(data)
    return ResolvedConfig(data=data, configs=configs, defaults=sorted(applied), warnings=warnings)


def _build(data):
    system, plant, design, est = data["system"], data["plant"], data["design"], data["estimator"]
    warnings = []
    try:
        if system == "pendulum":
            params = PendulumParams(length=data["true_params"][0], **plant, **design)
            warnings = params.constraint_warnings()
        else:
            I1, I2 = data["true_params"]
            params = WheelParams(I1=I1, I2=I2, **plant, **design)
        gains = EstimatorGains(
            c=est["c"], alpha=est["alpha"], P=est["P"], theta_min=est["theta_min"],
            theta_max=est["theta_max"], delta=est["delta"],
        )
        sampler = DomainSampler(**data["sampler"])
        if system == "wheel" and est["c_policy"] != "constant":
            raise ConfigError("estimator.c_policy: the wheel only supports constant gains")
        configs = [
            ScenarioConfig(
                name=data["name"], system=system, mode=mode, params=params,
                nominal_theta=tuple(data["nominal_params"]), estimator=gains,
                T=data["T"], steps=data["steps"], x0=tuple(data["x0"]),
                theta_hat0=tuple(data["theta_hat0"]), c_policy=est["c_policy"],
                c_scale=est["c_scale"], sampler=sampler,
            )
            for mode in data["modes"]
        ]
        # nominal parameters must be admissible for the controller
        for v in data["nominal_params"]:
            if not v > 0:
                raise ConfigError(f"nominal_params must be positive, got {data['nominal_params']}")
    except (ContractError, DomainError) as exc:
        raise ConfigError(str(exc)) from None
    for msg in warnings:
        log.warning("%s: %s", data["name"], msg)
    return configs, warnings


def parse_config(source, seed=None):
    """One :class:`ScenarioConfig` per requested mode."""
    return resolve_config(source, seed).configs


def preset_names():
    return sorted(PRESETS)
