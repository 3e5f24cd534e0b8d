"""Experiment configuration: TOML parsing, validation, defaults and emission.

A config file has three top-level keys (``command``, ``output_dir``,
``seed``) and one optional table per command family::

    command = "simulate"
    seed = 7

    [simulation]
    eps = 0.1
    t_end = 0.5

Tables that do not apply to the chosen command are still validated.
Unknown keys and tables are rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Dict, Optional, Tuple

import tomli

from .phase_grid import DomainError
from .simulator import SimConfig

__all__ = [
    "COMMANDS",
    "SECTIONS",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "emit_config",
    "emit_toml",
]

COMMANDS = ("simulate", "sweep", "pp-solve", "check-kernel-bounds", "boltzmann-expand",
            "macro-diagnose", "nondim")


class ConfigError(ValueError):
    """Invalid configuration.  ``key`` names the offending entry, ``line``/``column`` locate parse errors."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None,
                 column: Optional[int] = None):
        super().__init__(message)
        self.key = key
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# section schemas: key -> (kind, default, check)

def _pos(v):
    return v > 0


def _even8(v):
    return v >= 8 and v % 2 == 0


def _eps_list(v):
    return len(v) >= 2 and all(0 < e <= 1 for e in v) and len(set(v)) == len(v)


def _vec3(v):
    return len(v) == 3


Spec = Tuple[str, Any, Optional[Callable[[Any], bool]], str]

SECTIONS: Dict[str, Dict[str, Spec]] = {
    "sweep": {
        "eps_values": ("float_list", [0.2, 0.1, 0.05, 0.025], _eps_list,
                       "at least two distinct values in (0, 1]"),
    },
    "pp_solve": {
        "n_x": ("int", 64, lambda v: v >= 4, "at least 4"),
        "gamma": ("float", 1.0, _pos, "positive"),
        "amplitude": ("float", 0.3, lambda v: 0 <= v < 1, "in [0, 1)"),
        "wavenumber": ("int", 1, _pos, "positive"),
        "profile": ("float_list", [], lambda v: all(x > 0 for x in v), "positive densities"),
        "tol": ("float", 1e-10, _pos, "positive"),
        "max_iter": ("int", 50, _pos, "positive"),
    },
    "kernel_bounds": {
        "n": ("int", 24, _even8, "even and at least 8"),
        "extent": ("float", 6.0, _pos, "positive"),
        "fields": ("int", 50, _pos, "positive"),
        "samples": ("int", 200, _pos, "positive"),
    },
    "boltzmann": {
        "eps_values": ("float_list", [0.2, 0.1, 0.05, 0.025], _eps_list,
                       "at least two distinct values in (0, 1]"),
        "shift": ("float_list", [0.5, 0.0, 0.0], _vec3, "three components"),
        "beta": ("float", 1.0, _pos, "positive"),
        "ion_q": ("float", 2.0, _pos, "positive"),
        "quad_degree": ("int", 12, lambda v: v >= 6, "at least 6"),
        "ion_n": ("int", 10, _even8, "even and at least 8"),
        "electron_n": ("int", 12, _even8, "even and at least 8"),
        "landau_n": ("int", 16, _even8, "even and at least 8"),
    },
    "macro": {
        "trajectory": ("str", "", None, ""),
    },
    "nondim": {
        "m_plus": ("float", 1.0, _pos, "positive"),
        "m_minus": ("float", 0.005, _pos, "positive"),
        "theta": ("float", 1.0, _pos, "positive"),
        "N": ("float", 1.0e-4, _pos, "positive"),
        "Z": ("float", 1.0, _pos, "positive"),
        "ln_Lambda": ("float_or_auto", "auto", lambda v: v == "auto" or v > 0, "positive or 'auto'"),
        "unit_charge": ("bool", True, None, ""),
    },
}

_SIM_DEFAULTS = {f.name: f.default for f in fields(SimConfig) if f.name != "seed"}
TOP_KEYS = ("command", "output_dir", "seed")


def _coerce(kind: str, value, key: str):
    def bad():
        raise ConfigError(f"{key}: expected {kind.replace('_', ' ')}, got {value!r}", key)

    if kind == "bool":
        if not isinstance(value, bool):
            bad()
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            bad()
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            bad()
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            bad()
        return value
    if kind == "float_or_auto":
        if value == "auto":
            return value
        return _coerce("float", value, key)
    if kind == "float_list":
        if not isinstance(value, list):
            bad()
        return [_coerce("float", v, key) for v in value]
    if kind == "int_list":
        if not isinstance(value, list):
            bad()
        return [_coerce("int", v, key) for v in value]
    raise AssertionError(kind)


def _check_section(name: str, raw: dict) -> dict:
    spec = SECTIONS[name]
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(unknown)}", f"{name}.{unknown[0]}")
    out = {}
    for key, (kind, default, check, what) in spec.items():
        full = f"{name}.{key}"
        val = _coerce(kind, raw[key], full) if key in raw else (list(default) if isinstance(default, list) else default)
        if check is not None and not (isinstance(val, float) and math.isnan(val)) and not check(val):
            raise ConfigError(f"{full}: must be {what}, got {val!r}", full)
        if isinstance(val, float) and math.isnan(val):
            raise ConfigError(f"{full}: must be a number, got nan", full)
        out[key] = val
    return out


def _sim_kind(key: str, default) -> str:
    if key == "moments":
        return "int_list"
    if key in ("extent_ion", "extent_electron"):
        return "float"
    if isinstance(default, bool):
        return "bool"
    if isinstance(default, int):
        return "int"
    if isinstance(default, float):
        return "float"
    return "str"


def _check_simulation(raw: dict, seed: int) -> dict:
    unknown = sorted(set(raw) - set(_SIM_DEFAULTS))
    if unknown:
        raise ConfigError(f"[simulation] unknown key(s): {', '.join(unknown)}",
                          f"simulation.{unknown[0]}")
    data = {}
    for key, default in _SIM_DEFAULTS.items():
        if key in raw:
            data[key] = _coerce(_sim_kind(key, default), raw[key], f"simulation.{key}")
        elif default is not None:
            data[key] = list(default) if isinstance(default, tuple) else default
    try:
        SimConfig(**{**data, "seed": seed})
    except DomainError as exc:
        key = str(exc).split(":", 1)[0]
        raise ConfigError(f"simulation.{exc}", f"simulation.{key}") from None
    return data


@dataclass
class ExperimentConfig:
    """A validated experiment: the command, per-section parameters, output directory and seed."""

    command: str
    parameters: Dict[str, dict] = field(default_factory=dict)
    output_dir: str = "."
    seed: int = 0

    def simulation(self, quick: bool = False) -> SimConfig:
        cfg = SimConfig(**{**self.parameters["simulation"], "seed": self.seed})
        return cfg.quick() if quick else cfg

    def section(self, name: str) -> dict:
        return self.parameters[name]

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None):
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if output_dir is not None:
            out = replace(out, output_dir=str(output_dir))
        return out

    def to_dict(self) -> dict:
        d = {"command": self.command, "output_dir": self.output_dir, "seed": self.seed}
        for name, section in self.parameters.items():
            d[name] = {k: (list(v) if isinstance(v, (list, tuple)) else v) for k, v in section.items()}
        return d


def _from_mapping(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - set(TOP_KEYS) - set(SECTIONS) - {"simulation"})
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown[0])
    for name in list(SECTIONS) + ["simulation"]:
        if name in data and not isinstance(data[name], dict):
            raise ConfigError(f"{name}: expected a table", name)
    if "command" not in data:
        raise ConfigError("missing command", "command")
    command = data["command"]
    if command not in COMMANDS:
        raise ConfigError(f"command: must be one of {', '.join(COMMANDS)}, got {command!r}", "command")
    seed = _coerce("int", data.get("seed", 0), "seed")
    if seed < 0:
        raise ConfigError("seed: must be nonnegative", "seed")
    output_dir = _coerce("str", data.get("output_dir", "."), "output_dir")
    params = {"simulation": _check_simulation(data.get("simulation", {}), seed)}
    for name in SECTIONS:
        params[name] = _check_section(name, data.get(name, {}))
    return ExperimentConfig(command, params, output_dir, seed)


_LOC = re.compile(r"at line (\d+), column (\d+)")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate TOML text.

    Raises
    ------
    ConfigError
        Parse errors carry ``line`` and ``column``; range errors carry ``key``.
    """
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        if line is None:
            m = _LOC.search(str(exc))
            line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigError(f"parse error at line {line}, column {col}: {exc}", None, line, col) from None
    return _from_mapping(data)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# TOML emission

_BARE = re.compile(r"^[A-Za-z0-9_-]+$")
_ESCAPES = {'"': '\\"', "\\": "\\\\", "\b": "\\b", "\t": "\\t", "\n": "\\n", "\f": "\\f",
            "\r": "\\r"}


def _string(s: str) -> str:
    """TOML basic string: escape quotes, backslashes and control characters only."""
    out = []
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _key(k: str) -> str:
    return k if _BARE.match(k) else _string(k)


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return _string(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_value(x) for x in v) + "]"
    raise TypeError(f"cannot emit {type(v).__name__} as TOML")


def emit_toml(data: dict, _prefix: str = "") -> str:
    """Serialize a nested mapping of scalars and lists; ``None`` values are omitted."""
    scalars, tables = [], []
    for k, v in data.items():
        if v is None:
            continue
        if isinstance(v, dict):
            tables.append((k, v))
        else:
            scalars.append(f"{_key(k)} = {_value(v)}")
    chunks = []
    if _prefix:
        chunks.append("\n".join([f"[{_prefix}]"] + scalars))
    elif scalars:
        chunks.append("\n".join(scalars))
    for k, v in tables:
        name = f"{_prefix}.{_key(k)}" if _prefix else _key(k)
        chunks.append(emit_toml(v, name).rstrip("\n"))
    text = "\n\n".join(chunks)
    return text if _prefix else text + "\n"


def emit_config(cfg: ExperimentConfig) -> str:
    return emit_toml(cfg.to_dict())
