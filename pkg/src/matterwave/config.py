"""Sectioned ``key = value unit`` run configuration.

Every physical quantity carries its unit (``period = 2 um``); values are
normalized to SI at parse time. Lists are comma separated with one trailing
unit (``source_extent = 900, 90, 9 um``). Errors name the offending line.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from . import constants as K
from .errors import ConfigError

COMMANDS = ("pattern", "coherence", "slitwidth", "talbot-scan-l", "talbot-scan-e", "fields")

UNITS = {
    "length": {"m": K.m, "mm": K.mm, "um": K.um, "nm": K.nm, "pm": K.pm, "angstrom": K.angstrom},
    "energy": {"J": K.J, "eV": K.eV, "meV": K.meV, "keV": K.keV},
    "speed": {"m/s": 1.0, "km/s": 1e3},
    "time": {"s": K.s, "ms": K.ms, "us": K.us, "ns": K.ns},
    "angle": {"rad": K.rad, "deg": K.deg},
    "c3": {"meV*nm^3": 1.0},
}
SI_UNIT = {"length": "m", "energy": "J", "speed": "m/s", "time": "s", "angle": "rad", "c3": "meV*nm^3"}

# section -> key -> (kind, is_list)
SCHEMA: dict[str, dict[str, tuple[str, bool]]] = {
    "run": {"command": ("str", False), "label": ("str", False)},
    "species": {
        "name": ("str", False),
        "speed": ("speed", False),
        "energy": ("energy", False),
        "wavelength": ("length", False),
    },
    "grating": {
        "slits": ("int", False),
        "period": ("length", False),
        "width": ("length", False),
        "profile": ("str", False),
        "thickness": ("length", False),
        "wedge": ("angle", False),
        "first_slits": ("int", False),
        "first_width": ("length", False),
    },
    "material": {
        "c3": ("c3", False),
        "permittivity": ("float", False),
        "reference": ("str", False),
        "r_min": ("length", False),
        "interaction": ("bool", False),
    },
    "geometry": {
        "distance": ("length", False),
        "source_distance": ("length", False),
        "source_extent": ("length", True),
        "window": ("length", False),
        "points": ("int", False),
        "mode": ("str", False),
        "detector_resolution": ("length", False),
    },
    "beam": {
        "energy_sigma": ("energy", True),
        "speed_sigma": ("speed", False),
    },
    "scan": {
        "start": ("float", False),
        "stop": ("float", False),
        "points": ("int", False),
        "energy_start": ("energy", False),
        "energy_stop": ("energy", False),
        "method": ("str", False),
    },
    "slitwidth": {
        "species": ("str", True),
        "energies": ("energy", True),
        "thickness": ("length", True),
        "sweep_r_min": ("length", True),
    },
    "mc": {
        "samples": ("int", False),
        "seed": ("int", False),
        "batches": ("int", False),
        "decay_culling": ("bool", False),
    },
}

_SECTION = re.compile(r"^\[([A-Za-z_-]+)\]$")
_KEYVAL = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


@dataclass
class RunConfig:
    """Validated configuration, SI values keyed by (section, key)."""

    values: dict[str, dict] = field(default_factory=dict)
    lines: dict[tuple[str, str], int] = field(default_factory=dict, compare=False)

    @property
    def command(self) -> str:
        return self.values.get("run", {}).get("command", "")

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def has(self, section: str, key: str) -> bool:
        return key in self.values.get(section, {})

    def require(self, section: str, key: str):
        if not self.has(section, key):
            raise ConfigError(f"missing [{section}] {key}")
        return self.values[section][key]

    def set(self, section: str, key: str, value) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key [{section}] {key}")
        self.values.setdefault(section, {})[key] = value

    def line_of(self, section: str, key: str) -> int | None:
        return self.lines.get((section, key))


def _number(text: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}", line=line) from None
    if not math.isfinite(v):
        raise ConfigError(f"value must be finite: {text!r}", line=line)
    return v


def _parse_value(kind: str, is_list: bool, text: str, line: int):
    text = text.strip()
    if not text:
        raise ConfigError("empty value", line=line)
    if kind == "str":
        items = [t.strip() for t in text.split(",")] if is_list else [text]
        return items if is_list else items[0]
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"not a boolean: {text!r}", line=line)
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"not an integer: {text!r}", line=line) from None
    if kind == "float":
        items = [_number(t, line) for t in text.split(",")]
        return items if is_list else _single(items, line)
    # dimensional: numbers then one unit token
    parts = text.rsplit(None, 1)
    if len(parts) != 2 or parts[1] not in UNITS[kind]:
        unit = parts[1] if len(parts) == 2 else "none"
        if len(parts) == 2 and parts[1] not in UNITS[kind]:
            try:
                float(parts[1])
            except ValueError:
                raise ConfigError(
                    f"unit {unit!r} is not a {kind} unit (use one of {', '.join(UNITS[kind])})", line=line
                ) from None
        raise ConfigError(f"missing unit for {kind} value {text!r}", line=line)
    scale = UNITS[kind][parts[1]]
    items = [_number(t, line) * scale for t in parts[0].split(",")]
    return items if is_list else _single(items, line)


def _single(items, line):
    if len(items) != 1:
        raise ConfigError("expected a single value", line=line)
    return items[0]


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=n)
            continue
        m = _KEYVAL.match(line)
        if not m:
            raise ConfigError(f"cannot parse {raw.strip()!r}", line=n)
        if section is None:
            raise ConfigError("key outside any section", line=n)
        key, val = m.groups()
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", line=n)
        if key in cfg.values.get(section, {}):
            raise ConfigError(f"duplicate key {key!r} in [{section}]", line=n)
        kind, is_list = SCHEMA[section][key]
        cfg.values.setdefault(section, {})[key] = _parse_value(kind, is_list, val, n)
        cfg.lines[(section, key)] = n
    validate(cfg)
    return cfg


_POSITIVE = {
    ("grating", "period"), ("grating", "width"), ("grating", "slits"), ("grating", "first_width"),
    ("grating", "first_slits"), ("geometry", "distance"), ("geometry", "source_distance"),
    ("geometry", "window"), ("geometry", "points"), ("species", "speed"), ("species", "energy"),
    ("species", "wavelength"), ("mc", "samples"), ("mc", "batches"), ("scan", "points"),
    ("scan", "start"), ("scan", "stop"), ("scan", "energy_start"), ("scan", "energy_stop"),
    ("slitwidth", "energies"), ("geometry", "detector_resolution"),
}
_NON_NEGATIVE = {
    ("grating", "thickness"), ("grating", "wedge"), ("material", "c3"), ("material", "r_min"),
    ("geometry", "source_extent"), ("beam", "energy_sigma"), ("beam", "speed_sigma"), ("mc", "seed"),
    ("slitwidth", "thickness"), ("slitwidth", "sweep_r_min"),
}


def validate(cfg: RunConfig) -> None:
    for (sec, key) in _POSITIVE | _NON_NEGATIVE:
        if not cfg.has(sec, key):
            continue
        v = cfg.get(sec, key)
        vals = v if isinstance(v, list) else [v]
        strict = (sec, key) in _POSITIVE
        if any((x <= 0) if strict else (x < 0) for x in vals):
            need = "positive" if strict else "non-negative"
            raise ConfigError(f"[{sec}] {key} must be {need}", line=cfg.line_of(sec, key))
    if cfg.has("mc", "seed") and cfg.get("mc", "seed") >= 2**64:
        raise ConfigError("seed must fit in 64 bits", line=cfg.line_of("mc", "seed"))
    if cfg.has("material", "permittivity") and cfg.get("material", "permittivity") < 1:
        raise ConfigError("permittivity must be >= 1", line=cfg.line_of("material", "permittivity"))
    if cfg.has("run", "command") and cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}", line=cfg.line_of("run", "command"))
    if cfg.has("grating", "profile") and cfg.get("grating", "profile") not in ("rectangular", "gaussian"):
        raise ConfigError("profile must be rectangular or gaussian", line=cfg.line_of("grating", "profile"))
    given = [k for k in ("speed", "energy", "wavelength") if cfg.has("species", k)]
    if len(given) > 1:
        raise ConfigError("give only one of speed, energy, wavelength", line=cfg.line_of("species", given[1]))
    if cfg.has("grating", "period") and cfg.has("grating", "width"):
        if cfg.get("grating", "slits", 2) > 1 and cfg.get("grating", "period") <= cfg.get("grating", "width"):
            raise ConfigError("period must exceed slit width", line=cfg.line_of("grating", "period"))


def _fmt(kind: str, v) -> str:
    if kind == "bool":
        return "true" if v else "false"
    if kind in ("str", "int"):
        return ", ".join(str(x) for x in v) if isinstance(v, list) else str(v)
    nums = ", ".join(repr(float(x)) for x in (v if isinstance(v, list) else [v]))
    return nums if kind == "float" else f"{nums} {SI_UNIT[kind]}"


def emit_config(cfg: RunConfig) -> str:
    """Canonical text in SI units; parse_config(emit_config(c)) == c."""
    out = []
    for sec, keys in SCHEMA.items():
        present = [k for k in keys if cfg.has(sec, k)]
        if not present:
            continue
        out.append(f"[{sec}]")
        for k in present:
            out.append(f"{k} = {_fmt(keys[k][0], cfg.get(sec, k))}")
        out.append("")
    return "\n".join(out)
