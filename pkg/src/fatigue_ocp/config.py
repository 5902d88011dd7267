"""Plain key-value configuration shared by the CLI and parameter loaders.

Format: one `key = value` per line, `#` comments, blank lines ignored.
Keys are dotted paths (`fatigue.F`, `arm.upper.length`, `ocp.cycles`).
Values parse as int, float, bool or bare string.  Per-actuator fatigue
overrides use `fatigue.<actuator>.<field>` with actuator one of
shoulder_plus, shoulder_minus, elbow_plus, elbow_minus.
"""

from __future__ import annotations

import hashlib
import math
from typing import Any, Optional

from .armmodel import ActuatorLimits, ArmModel
from .fatigue import FatigueParams

__all__ = [
    "ConfigError",
    "load_config",
    "parse_value",
    "fatigue_params_from_config",
    "arm_model_from_config",
    "limits_from_config",
    "config_hash",
    "ACTUATOR_NAMES",
    "default_sim_params",
    "default_curl_params",
]

ACTUATOR_NAMES = ("shoulder_plus", "shoulder_minus", "elbow_plus", "elbow_minus")

# Isometric elbow-torque parameter set used by the forward-simulation studies.
SIM_F = 0.00912
SIM_R = 0.00094
# Fatigue rate tuned so the curl task exhausts within a desk-scale run.
CURL_F = 0.456


class ConfigError(ValueError):
    """Malformed configuration file or inconsistent values."""


def parse_value(text: str) -> Any:
    text = text.strip()
    low = text.lower()
    if low in ("true", "on", "yes"):
        return True
    if low in ("false", "off", "no"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def load_config(path: Optional[str]) -> dict[str, Any]:
    """Parse a key-value file into a flat dict; None yields an empty config."""
    if path is None:
        return {}
    cfg: dict[str, Any] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                key = key.strip()
                if not key:
                    raise ConfigError(f"{path}:{lineno}: empty key")
                cfg[key] = parse_value(value)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return cfg


def _get_float(cfg: dict, key: str, default: float) -> float:
    v = cfg.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def default_sim_params(S: float = 10.0) -> FatigueParams:
    """Fatigue parameters of the forward-simulation studies (elbow torque)."""
    return FatigueParams(F=SIM_F, R=SIM_R, LD=10.0, LR=10.0, r=1.0, S=S)


def default_curl_params(S: float = 10.0) -> FatigueParams:
    """Fatigue parameters of the dumbbell-curl optimal control runs."""
    return FatigueParams(F=CURL_F, R=SIM_R, LD=10.0, LR=10.0, r=1.0, S=S)


def fatigue_params_from_config(cfg: dict, actuator: Optional[str] = None,
                               base: Optional[FatigueParams] = None) -> FatigueParams:
    """Build FatigueParams from `fatigue.*` keys, with per-actuator overrides."""
    if base is None:
        base = default_sim_params()
    if actuator is not None and actuator not in ACTUATOR_NAMES:
        raise ConfigError(f"unknown actuator {actuator!r}")

    def key_value(field: str, fallback: float) -> float:
        value = _get_float(cfg, f"fatigue.{field}", fallback)
        if actuator is not None:
            value = _get_float(cfg, f"fatigue.{actuator}.{field}", value)
        return value

    try:
        return FatigueParams(
            F=key_value("F", base.F),
            R=key_value("R", base.R),
            LD=key_value("LD", base.LD),
            LR=key_value("LR", base.LR),
            r=key_value("r", base.r),
            S=key_value("S", base.S),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def arm_model_from_config(cfg: dict) -> ArmModel:
    base = ArmModel()
    try:
        return ArmModel(
            upper_length=_get_float(cfg, "arm.upper.length", base.upper_length),
            upper_mass=_get_float(cfg, "arm.upper.mass", base.upper_mass),
            upper_com=_get_float(cfg, "arm.upper.com", base.upper_com),
            upper_inertia=_get_float(cfg, "arm.upper.inertia", base.upper_inertia),
            fore_length=_get_float(cfg, "arm.fore.length", base.fore_length),
            fore_mass=_get_float(cfg, "arm.fore.mass", base.fore_mass),
            fore_com=_get_float(cfg, "arm.fore.com", base.fore_com),
            fore_inertia=_get_float(cfg, "arm.fore.inertia", base.fore_inertia),
            dumbbell_mass=_get_float(cfg, "arm.dumbbell_mass", base.dumbbell_mass),
            gravity=_get_float(cfg, "arm.gravity", base.gravity),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def limits_from_config(cfg: dict) -> ActuatorLimits:
    base = ActuatorLimits()
    try:
        return ActuatorLimits(
            tau_max=_get_float(cfg, "limits.tau_max", base.tau_max),
            tau_min=_get_float(cfg, "limits.tau_min", base.tau_min),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(cfg: dict) -> str:
    """Stable short hash of a flat config dict, for run manifests."""
    canon = "\n".join(f"{k}={cfg[k]!r}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def degrees(rad: float) -> float:
    return rad * 180.0 / math.pi


def radians(deg: float) -> float:
    return deg * math.pi / 180.0
