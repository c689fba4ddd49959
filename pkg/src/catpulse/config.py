"""Strict TOML run configuration.

Every rate is given in units of the reference named by the top-level
``unit`` key (``"gamma"`` or ``"g"``); the reference rate itself is 1 and
may be omitted. Unknown sections or keys are rejected.

Example::

    kind = "single-cat"
    unit = "gamma"

    [system]
    g = 10.0
    delta = 1000.0
    kappa_in = 0.1
    kappa_ex = "optimal"

    [pulse]
    kappa_tau = 50.0
    alpha = 2.0
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import CatpulseError, ConfigError
from .model import SystemParams

KINDS = ("single-cat", "four-cat", "pe-map", "kex-sweep", "wigner")
UNITS = ("gamma", "g")

_SYSTEM_KEYS = {"g", "delta", "gamma", "kappa_ex", "kappa_in", "delta_g", "delta_e", "r1", "r2", "n_emitters"}
_PULSE_KEYS = {"tau", "kappa_tau", "t0_over_tau", "T_over_tau", "grid", "alpha", "beta"}
_NUMERICS_KEYS = {"rtol", "atol", "n_cavity", "n_virtual", "long_pulse"}
_OUTPUT_KEYS = {"dir", "trajectory"}
_PE_MAP_KEYS = {"kappa_over_g", "kappa_tau", "n_cavity"}
_SWEEP_KEYS = {"kappa_in_over_g", "target", "bracket_over_kappa_in", "rel_tol"}
_WIGNER_KEYS = {"target", "x_min", "x_max", "p_min", "p_max", "points"}
_SECTIONS = {
    "system": _SYSTEM_KEYS, "pulse": _PULSE_KEYS, "numerics": _NUMERICS_KEYS, "output": _OUTPUT_KEYS,
    "pe_map": _PE_MAP_KEYS, "sweep": _SWEEP_KEYS, "wigner": _WIGNER_KEYS,
}
_TOP_KEYS = {"kind", "unit"}
KAPPA_EX_RULES = ("optimal", "optimal-four-cat")


@dataclass
class RunConfig:
    """Parsed configuration plus the verbatim source text."""

    kind: str
    unit: str
    system: dict
    pulse: dict
    numerics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    pe_map: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    wigner: dict = field(default_factory=dict)
    source: str = ""

    def system_params(self, **overrides) -> SystemParams:
        """SystemParams with ``kappa_ex = "optimal"`` rules resolved."""
        from .analytics import optimal_kappa_ex

        raw = {**self.system, **overrides}
        rule = raw.get("kappa_ex")
        if isinstance(rule, str):
            provisional = SystemParams(**{**raw, "kappa_ex": 1.0})
            variant = "four-cat" if rule == "optimal-four-cat" else "two-cat"
            raw["kappa_ex"] = optimal_kappa_ex(provisional, variant)
        return SystemParams(**raw)

    @property
    def tolerances(self):
        n = self.numerics
        if "rtol" in n or "atol" in n:
            from .policy import get_policy

            pol = get_policy()
            return (float(n.get("rtol", pol.rtol)), float(n.get("atol", pol.atol)))
        return None


def _number(section: str, key: str, value, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key} must be finite")
    if positive and not value > 0:
        raise ConfigError(f"[{section}] {key} must be positive, got {value}")
    if nonneg and value < 0:
        raise ConfigError(f"[{section}] {key} must be non-negative, got {value}")
    return int(value) if integer else float(value)


def _amplitude(section: str, key: str, value) -> complex:
    """A real number or a ``[re, im]`` pair."""
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(f"[{section}] {key} must be a number or [re, im]")
        return complex(_number(section, key, value[0]), _number(section, key, value[1]))
    return complex(_number(section, key, value))


def _number_list(section: str, key: str, value, positive=True) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"[{section}] {key} must be a non-empty list of numbers")
    return [_number(section, key, v, positive=positive) for v in value]


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; raises ConfigError."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from exc
    unknown = set(data) - _TOP_KEYS - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for name, allowed in _SECTIONS.items():
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = set(sec) - allowed
        if extra:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")

    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    unit = data.get("unit")
    if unit not in UNITS:
        raise ConfigError(f"unit must be one of {UNITS} (the rate all others are measured in), got {unit!r}")

    system = {}
    raw_sys = dict(data.get("system", {}))
    raw_sys.setdefault(unit, 1.0)
    for key, value in raw_sys.items():
        if key == "kappa_ex" and isinstance(value, str):
            if value not in KAPPA_EX_RULES:
                raise ConfigError(f"[system] kappa_ex must be a number or one of {KAPPA_EX_RULES}")
            system[key] = value
        elif key == "n_emitters":
            system[key] = _number("system", key, value, positive=True, integer=True)
        elif key in ("g", "delta"):
            system[key] = _number("system", key, value)
        else:
            system[key] = _number("system", key, value, nonneg=True)
    if system[unit] != 1.0:
        raise ConfigError(f"unit = {unit!r} means [system] {unit} must be 1, got {system[unit]}")
    for required in ("g", "delta", "gamma"):
        if required not in system:
            raise ConfigError(f"[system] {required} is required")
    if kind not in ("pe-map", "kex-sweep") and "kappa_ex" not in system:
        raise ConfigError("[system] kappa_ex is required (a number, 'optimal' or 'optimal-four-cat')")

    pulse = {}
    for key, value in data.get("pulse", {}).items():
        if key in ("alpha", "beta"):
            pulse[key] = _amplitude("pulse", key, value)
        elif key == "grid":
            pulse[key] = _number("pulse", key, value, positive=True, integer=True)
        else:
            pulse[key] = _number("pulse", key, value, positive=True)
    if kind != "pe-map" and ("tau" in pulse) == ("kappa_tau" in pulse):
        raise ConfigError("[pulse] needs exactly one of tau or kappa_tau")

    numerics = {}
    for key, value in data.get("numerics", {}).items():
        if key == "long_pulse":
            if not isinstance(value, bool):
                raise ConfigError("[numerics] long_pulse must be true or false")
            numerics[key] = value
        elif key in ("n_cavity", "n_virtual"):
            numerics[key] = _number("numerics", key, value, positive=True, integer=True)
        else:
            numerics[key] = _number("numerics", key, value, positive=True)

    output = dict(data.get("output", {}))
    for key, value in output.items():
        if key == "dir" and not isinstance(value, str):
            raise ConfigError("[output] dir must be a string")
        if key == "trajectory" and not isinstance(value, bool):
            raise ConfigError("[output] trajectory must be true or false")

    pe_map = {}
    for key, value in data.get("pe_map", {}).items():
        if key == "n_cavity":
            pe_map[key] = _number("pe_map", key, value, positive=True, integer=True)
        else:
            pe_map[key] = _number_list("pe_map", key, value)

    sweep = {}
    for key, value in data.get("sweep", {}).items():
        if key == "target":
            if value not in ("two-cat", "four-cat"):
                raise ConfigError("[sweep] target must be 'two-cat' or 'four-cat'")
            sweep[key] = value
        elif key == "rel_tol":
            sweep[key] = _number("sweep", key, value, positive=True)
        elif key == "bracket_over_kappa_in":
            b = _number_list("sweep", key, value)
            if len(b) != 2 or not b[0] < b[1]:
                raise ConfigError("[sweep] bracket_over_kappa_in must be [lo, hi] with lo < hi")
            sweep[key] = b
        else:
            sweep[key] = _number_list("sweep", key, value)

    wig = {}
    for key, value in data.get("wigner", {}).items():
        if key == "target":
            if value not in ("two-cat", "four-cat"):
                raise ConfigError("[wigner] target must be 'two-cat' or 'four-cat'")
            wig[key] = value
        elif key == "points":
            wig[key] = _number("wigner", key, value, positive=True, integer=True)
        else:
            wig[key] = _number("wigner", key, value)

    if kind == "pe-map":
        for key in ("kappa_over_g", "kappa_tau"):
            if key not in pe_map:
                raise ConfigError(f"[pe_map] {key} is required")
        if "alpha" not in pulse:
            raise ConfigError("[pulse] alpha is required")
    if kind == "kex-sweep" and "kappa_in_over_g" not in sweep:
        raise ConfigError("[sweep] kappa_in_over_g is required")
    if kind in ("single-cat",) and "alpha" not in pulse:
        raise ConfigError("[pulse] alpha is required")
    target = sweep.get("target") if kind == "kex-sweep" else wig.get("target")
    if kind == "four-cat" or (kind in ("kex-sweep", "wigner") and target == "four-cat"):
        if "beta" not in pulse:
            raise ConfigError("[pulse] beta is required for four-component cats")
        if system.get("n_emitters", 2) != 2:
            raise ConfigError("four-component cats need n_emitters = 2")
        system["n_emitters"] = 2
    elif kind in ("kex-sweep", "wigner") and "alpha" not in pulse:
        raise ConfigError("[pulse] alpha is required")

    cfg = RunConfig(kind, unit, system, pulse, numerics, output, pe_map, sweep, wig, text)
    # fail early on physically invalid rates
    try:
        if kind not in ("pe-map", "kex-sweep"):
            cfg.system_params()
        else:
            SystemParams(**{**system, "kappa_ex": 1.0})
    except CatpulseError as exc:
        raise ConfigError(str(exc)) from exc
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
