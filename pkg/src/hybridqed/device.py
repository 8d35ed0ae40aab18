"""Flux- and bias-dependent scalar device models.

All frequencies are omega/2pi in GHz. Flux phases follow a single convention:
the cosine argument of a SQUID with composite bias ``x`` (in flux quanta) is
``2*pi*x``, e.g. ``2*pi*(gamma*phi_sq + phi_c)`` for the array. The fitted
constants absorb the convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from scipy.optimize import brentq

from .units import format_quantity, parse_quantity

TWO_PI = 2.0 * math.pi


def _q(default, kind, doc=""):
    return field(default=default, metadata={"kind": kind, "doc": doc})


@dataclass(frozen=True)
class SquidArrayParams:
    omega0: float = _q(7.867, "frequency", "bare array frequency")
    beta: float = _q(0.1, "number", "stray single-junction inductance ratio")
    gamma: float = _q(0.43, "number", "coil flux lever arm")
    phi_c: float = _q(0.0072, "flux", "flux offset")
    n_sq: int = _q(35, "integer")
    n_sj: int = _q(34, "integer")
    kappa_ext: float = _q(0.004, "frequency")
    kappa_int: float = _q(0.008, "frequency")

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.kappa_ext < 0 or self.kappa_int < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def kappa_tot(self) -> float:
        return self.kappa_ext + self.kappa_int


# Two linewidth configurations quoted for the array resonator: (kappa_ext, kappa_int) in GHz.
KAPPA_PRESETS = {
    "main": (0.003, 0.005),
    "undercoupled": (0.004, 0.008),
}


@dataclass(frozen=True)
class TransmonParams:
    e_c: float = _q(0.243, "frequency", "charging energy / h")
    e_j0: float = _q(30.0, "frequency", "zero-flux Josephson energy / h")
    omega_pl: float | None = _q(6.550, "frequency", "plasma frequency; overrides e_j0 when set")
    alpha: float = _q(4.41, "number", "loop-area ratio transmon / array")
    n_g: float = _q(0.0, "number")
    n_levels: int = _q(4, "integer")
    charge_cutoff: int = _q(20, "integer")

    def __post_init__(self):
        if self.e_c <= 0 or self.e_j0 <= 0:
            raise ValueError("e_c and e_j0 must be positive")
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2")

    @property
    def plasma_frequency(self) -> float:
        if self.omega_pl is not None:
            return self.omega_pl
        return math.sqrt(8.0 * self.e_c * self.e_j0)

    @property
    def e_j_max(self) -> float:
        """Zero-flux Josephson energy consistent with the plasma frequency."""
        return self.plasma_frequency ** 2 / (8.0 * self.e_c)


@dataclass(frozen=True)
class DqdParams:
    t_c: float = _q(1.8175, "frequency", "tunnel coupling / h")
    delta: float = _q(0.0, "frequency", "detuning / h")
    gamma2: float = _q(0.0026, "frequency", "dephasing rate / 2pi")

    def __post_init__(self):
        if self.t_c < 0:
            raise ValueError("t_c must be non-negative")


@dataclass(frozen=True)
class CouplingParams:
    g0_tr_sq: float = _q(0.230, "frequency")
    g0_tr_50: float = _q(0.120, "frequency")
    # 33 MHz at omega_r,Sq = 4.089 GHz referred back to zero flux
    g0_dqd_sq: float = _q(0.033 * math.sqrt(7.867 / 4.089), "frequency")
    omega_r50: float = _q(6.490, "frequency")

    def __post_init__(self):
        if min(self.g0_tr_sq, self.g0_tr_50, self.g0_dqd_sq, self.omega_r50) < 0:
            raise ValueError("couplings and frequencies must be non-negative")


@dataclass(frozen=True)
class FluxBias:
    phi_sq: float = _q(0.0, "flux")
    phi_tr: float = _q(0.162, "flux")

    def __post_init__(self):
        if not (math.isfinite(self.phi_sq) and math.isfinite(self.phi_tr)):
            raise ValueError("flux bias must be finite")


@dataclass(frozen=True)
class DeviceParams:
    squid: SquidArrayParams = field(default_factory=SquidArrayParams)
    transmon: TransmonParams = field(default_factory=TransmonParams)
    coupling: CouplingParams = field(default_factory=CouplingParams)

    def with_values(self, **values) -> "DeviceParams":
        """Copy with flat ``section_field`` overrides, e.g. ``squid_beta=0.11``."""
        parts = {"squid": {}, "transmon": {}, "coupling": {}}
        for key, val in values.items():
            section, _, name = key.partition("_")
            if section not in parts:
                raise KeyError(key)
            parts[section][name] = val
        return DeviceParams(
            replace(self.squid, **parts["squid"]),
            replace(self.transmon, **parts["transmon"]),
            replace(self.coupling, **parts["coupling"]),
        )

    def get(self, key: str) -> float:
        section, _, name = key.partition("_")
        return getattr(getattr(self, section), name)


# ---------------------------------------------------------------- flux laws

def total_flux_sq(p: SquidArrayParams, b: FluxBias) -> float:
    """Cosine argument (rad) of the array SQUIDs."""
    return TWO_PI * (p.gamma * b.phi_sq + p.phi_c)


def total_flux_tr(p: TransmonParams, b: FluxBias) -> float:
    """Cosine argument (rad) of the transmon SQUID."""
    return TWO_PI * (p.alpha * b.phi_sq + b.phi_tr)


def _inductance_factor(p: SquidArrayParams, b: FluxBias) -> float:
    """beta + 1/|cos|; infinite at the degenerate flux."""
    c = abs(math.cos(total_flux_sq(p, b)))
    return math.inf if c == 0.0 else p.beta + 1.0 / c


def squid_array_frequency(p: SquidArrayParams, b: FluxBias) -> float:
    return p.omega0 / math.sqrt(_inductance_factor(p, b))


def squid_impedance(p: SquidArrayParams, b: FluxBias) -> float:
    """Array impedance relative to its zero-flux value."""
    return math.sqrt(_inductance_factor(p, b) / (p.beta + 1.0))


def josephson_energy(p: TransmonParams, b: FluxBias) -> float:
    return p.e_j_max * abs(math.cos(total_flux_tr(p, b)))


def transmon_frequency(p: TransmonParams, b: FluxBias) -> float:
    """Asymptotic 0-1 frequency; turns negative near half flux where the model breaks down."""
    return p.plasma_frequency * math.sqrt(abs(math.cos(total_flux_tr(p, b)))) - p.e_c


def dqd_frequency(p: DqdParams) -> float:
    return math.hypot(2.0 * p.t_c, p.delta)


def coupling_tr_sq(c: CouplingParams, p_sq: SquidArrayParams, p_tr: TransmonParams,
                   b: FluxBias) -> float:
    cos_tr = abs(math.cos(total_flux_tr(p_tr, b)))
    return c.g0_tr_sq * cos_tr ** 0.25 / _inductance_factor(p_sq, b) ** 0.25


def coupling_tr_50(c: CouplingParams, p_tr: TransmonParams, b: FluxBias) -> float:
    return c.g0_tr_50 * abs(math.cos(total_flux_tr(p_tr, b))) ** 0.25


class MixingError(ValueError):
    """DQD splitting vanishes; the mixing factor is undefined."""


def coupling_dqd_sq(c: CouplingParams, p_sq: SquidArrayParams, d: DqdParams,
                    b: FluxBias) -> float:
    w = dqd_frequency(d)
    if w == 0.0:
        raise MixingError("t_c = delta = 0: DQD mixing angle undefined")
    return c.g0_dqd_sq / _inductance_factor(p_sq, b) ** 0.25 * (2.0 * d.t_c / w)


def flux_for_squid_frequency(p: SquidArrayParams, target: float, phi_tr: float = 0.0) -> float:
    """Smallest array bias above the frequency maximum giving `target` GHz."""
    lo = -p.phi_c / p.gamma
    hi = (0.25 - p.phi_c) / p.gamma
    def f(x):
        return squid_array_frequency(p, FluxBias(x, phi_tr)) - target

    if not 0.0 < target < squid_array_frequency(p, FluxBias(lo, phi_tr)):
        raise ValueError(f"target {target} GHz outside the array tuning range")
    return brentq(f, lo, hi - 1e-12, xtol=1e-14)


# --------------------------------------------------------- key-value schema

SECTIONS = {
    "squid": SquidArrayParams,
    "transmon": TransmonParams,
    "coupling": CouplingParams,
    "dqd": DqdParams,
    "bias": FluxBias,
}


def to_config(obj) -> dict[str, str]:
    """Dataclass of scalar fields -> ``{name: "value unit"}``."""
    out = {}
    for f in fields(obj):
        val = getattr(obj, f.name)
        out[f.name] = "none" if val is None else format_quantity(val, f.metadata["kind"])
    return out


def from_config(cls, mapping: dict[str, str], base=None):
    """Build `cls` from unit-suffixed strings; unknown keys raise KeyError."""
    known = {f.name: f for f in fields(cls)}
    values = {}
    for key, text in mapping.items():
        if key not in known:
            raise KeyError(f"unknown key {key!r} for {cls.__name__}")
        if str(text).strip().lower() == "none":
            values[key] = None
        else:
            values[key] = parse_quantity(text, known[key].metadata["kind"])
    return replace(base, **values) if base is not None else cls(**values)
