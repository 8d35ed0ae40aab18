"""Unit-suffixed scalar parsing for configuration files.

Internal units: frequencies in GHz (values of omega/2pi), times in ns, flux in
flux quanta, phases in rad.
"""
from __future__ import annotations

import math
import re

_FREQ = {"hz": 1e-9, "khz": 1e-6, "mhz": 1e-3, "ghz": 1.0, "thz": 1e3}
_TIME = {"s": 1e9, "ms": 1e6, "us": 1e3, "µs": 1e3, "ns": 1.0, "ps": 1e-3}
_FLUX = {"phi0": 1.0, "mphi0": 1e-3}
_ANGLE = {"rad": 1.0, "deg": math.pi / 180.0}

KINDS = {
    "frequency": (_FREQ, "GHz"),
    "time": (_TIME, "ns"),
    "flux": (_FLUX, "phi0"),
    "angle": (_ANGLE, "rad"),
}

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s]*)\s*$")


class UnitError(ValueError):
    pass


def parse_quantity(text: str, kind: str) -> float:
    """Parse ``"243 MHz"`` style text into the internal unit of `kind`.

    kind is one of frequency, time, flux, angle, number, integer, plus the
    non-numeric text, list (comma separated) and bool. Frequencies, times and
    angles must carry a unit; flux may omit ``phi0``.
    """
    if kind == "text":
        return str(text).strip()
    if kind == "list":
        return tuple(item.strip() for item in str(text).split(",") if item.strip())
    if kind == "bool":
        word = str(text).strip().lower()
        if word in _BOOL:
            return _BOOL[word]
        raise UnitError(f"boolean expected, got {text!r}")
    m = _NUM.match(str(text))
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if kind == "number":
        if unit:
            raise UnitError(f"dimensionless value expected, got unit {unit!r}")
        return value
    if kind == "integer":
        if unit or value != int(value):
            raise UnitError(f"integer expected, got {text!r}")
        return int(value)
    table, _ = KINDS[kind]
    if not unit:
        if kind == "flux":
            return value
        raise UnitError(f"{kind} value {text!r} needs a unit ({', '.join(table)})")
    scale = table.get(unit.lower()) if unit != "µs" else table["µs"]
    if scale is None:
        raise UnitError(f"unknown {kind} unit {unit!r} in {text!r}")
    return value * scale


def format_quantity(value: float, kind: str) -> str:
    """Inverse of :func:`parse_quantity` in internal units."""
    if kind == "integer":
        return str(int(value))
    if kind == "text":
        return str(value)
    if kind == "list":
        return ", ".join(value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "number":
        return f"{value:.12g}"
    return f"{value:.12g} {KINDS[kind][1]}"
