"""Run configuration: INI-style sections with unit-suffixed values.

Every key is checked against a schema before anything is computed; unknown
sections or keys are errors, reported with the file line they came from.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from . import device as dev
from .device import _q
from .operators import DQD, R50, SQUID, TRANSMON
from .units import UnitError, parse_quantity

EXPERIMENTS = ("spectrum", "rabi", "s11", "chevron", "fit")

SUBSYSTEM_NAMES = {"dqd": DQD, "transmon": TRANSMON, "squid": SQUID, "r50": R50}


class ConfigError(ValueError):
    def __init__(self, message, source=None, line=None, section=None, key=None):
        self.source, self.line, self.section, self.key = source, line, section, key
        where = f"{source}" if source else "<config>"
        if line:
            where += f":{line}"
        what = f"[{section}]" if section else ""
        if key:
            what += f" {key}"
        super().__init__(f"{where}: {what + ': ' if what else ''}{message}")


# ----------------------------------------------------------------- sections

@dataclass(frozen=True)
class RunSection:
    experiment: str = _q("spectrum", "text")
    model: str = _q("device", "text", "device (flux laws) or point (tabulated operating point)")


@dataclass(frozen=True)
class TruncationSection:
    n_tr: int = _q(4, "integer")
    n_sq: int = _q(5, "integer")
    n_50: int = _q(3, "integer")
    subsystems: tuple = _q(("dqd", "transmon", "squid", "r50"), "list")


@dataclass(frozen=True)
class PointSection:
    two_t_c: float = _q(3.635, "frequency")
    omega_tr: float = _q(3.695, "frequency")
    omega_sq: float = _q(4.062, "frequency")
    g_tr_sq: float = _q(0.128, "frequency")
    g_dqd_sq: float = _q(0.036, "frequency")
    g_tr_50: float = _q(0.093, "frequency")
    omega_50: float = _q(6.490, "frequency")


@dataclass(frozen=True)
class SweepSection:
    axis: str = _q("delta", "text", "delta, dphi_tr (point model) or phi_sq, phi_tr, delta (device)")
    start: str = _q("0 GHz", "text")
    stop: str = _q("0.8 GHz", "text")
    points: int = _q(401, "integer")
    n_transitions: int = _q(4, "integer")
    track: bool = _q(True, "bool")
    crossing: tuple = _q((), "list", "two branch indices whose avoided crossing is reported")


@dataclass(frozen=True)
class ProbeSection:
    center: float = _q(4.089, "frequency")
    span: float = _q(0.3, "frequency")
    points: int = _q(2001, "integer")


@dataclass(frozen=True)
class ReflectionSection:
    resonator: str = _q("squid", "text")
    kappa_ext: float = _q(0.003, "frequency")
    kappa_int: float = _q(0.005, "frequency")
    kappa_ext_50: float = _q(0.002, "frequency")
    kappa_int_50: float = _q(0.002, "frequency")
    multiplex_phase: float = _q(0.0, "angle")


@dataclass(frozen=True)
class ChevronSection:
    two_j: float = _q(0.0216, "frequency")
    t1: float = _q(185.0, "time")
    t2star: float = _q(127.0, "time")
    gamma2: float = _q(0.0026, "frequency")
    omega_dqd: float = _q(3.660, "frequency")
    resonant_amplitude: float = _q(0.6, "number")
    slope: float = _q(8 * 0.0216, "frequency", "transmon frequency change per unit A/A0")
    filter_sigma: float = _q(3.0, "time")
    prep_offset: float = _q(23.0, "time")
    amplitude_start: float = _q(0.0, "number")
    amplitude_stop: float = _q(1.0, "number")
    amplitude_points: int = _q(21, "integer")
    plateau_start: float = _q(0.0, "time")
    plateau_stop: float = _q(250.0, "time")
    plateau_points: int = _q(126, "integer")
    max_step: float = _q(0.05, "time")


@dataclass(frozen=True)
class FitSection:
    free: tuple = _q(("transmon_omega_pl", "squid_omega0", "squid_beta", "coupling_g0_tr_sq",
                      "coupling_g0_tr_50"), "list")
    bound_rel: float = _q(0.5, "number", "half-width of the search box relative to the start")
    start_offset: float = _q(0.1, "number", "relative start perturbation, alternating sign")
    observations: str = _q("synthetic", "text", "CSV path (phi_sq, frequency, weight, branch)")
    phi_start: float = _q(-0.3, "flux")
    phi_stop: float = _q(0.3, "flux")
    points: int = _q(21, "integer")
    n_branches: int = _q(3, "integer")
    spread_tol: float = _q(1e-5, "frequency")
    max_iter: int = _q(2000, "integer")


DEVICE_SECTIONS = {"squid": dev.SquidArrayParams, "transmon": dev.TransmonParams,
                   "coupling": dev.CouplingParams, "dqd": dev.DqdParams, "bias": dev.FluxBias}
_MODEL = {"truncation": TruncationSection, **DEVICE_SECTIONS}

SCHEMA = {
    "spectrum": {"run": RunSection, **_MODEL, "point": PointSection, "sweep": SweepSection},
    "rabi": {"run": RunSection, **_MODEL, "point": PointSection, "probe": ProbeSection,
             "reflection": ReflectionSection},
    "s11": {"run": RunSection, **_MODEL, "point": PointSection, "probe": ProbeSection,
            "reflection": ReflectionSection},
    "chevron": {"run": RunSection, "chevron": ChevronSection},
    "fit": {"run": RunSection, **_MODEL, "fit": FitSection},
}


@dataclass
class RunConfig:
    experiment: str
    sections: dict                                  # name -> section dataclass
    source: str | None = None
    lines: dict = field(default_factory=dict)       # (section, key) -> line number

    def __getitem__(self, name):
        return self.sections[name]

    def device(self) -> dev.DeviceParams:
        s = self.sections
        return dev.DeviceParams(s["squid"], s["transmon"], s["coupling"])

    def layout_include(self) -> tuple:
        return tuple(SUBSYSTEM_NAMES[n] for n in self.sections["truncation"].subsystems)

    def error(self, message, section=None, key=None) -> ConfigError:
        return ConfigError(message, self.source, self.lines.get((section, key)), section, key)

    def resolved(self) -> dict:
        """Every section and key with its value, defaults included, as unit strings."""
        return {name: dev.to_config(obj) for name, obj in self.sections.items()}

    def to_ini(self) -> str:
        lines = []
        for name, items in self.resolved().items():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in items.items()]
            lines.append("")
        return "\n".join(lines)


# ------------------------------------------------------------------ loading

def preset_names() -> list[str]:
    root = resources.files("hybridqed") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve_path(name: str) -> Path:
    """A file path, or the name of a bundled preset (with or without ``.cfg``)."""
    path = Path(name)
    if path.is_file():
        return path
    stem = path.name[:-4] if path.name.endswith(".cfg") else path.name
    candidate = resources.files("hybridqed") / "presets" / f"{stem}.cfg"
    if candidate.is_file():
        return Path(str(candidate))
    raise ConfigError(f"no such config file or preset {name!r} "
                      f"(presets: {', '.join(preset_names())})")


def _line_index(text: str) -> dict:
    index, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = no
            continue
        m = re.match(r"\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
        if m and section:
            index[(section, m.group(1).strip())] = no
    return index


def load(name: str, experiment: str | None = None) -> RunConfig:
    path = resolve_path(name)
    return parse(path.read_text(encoding="utf-8"), str(path), experiment)


def parse(text: str, source: str | None = None, experiment: str | None = None) -> RunConfig:
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], source, getattr(exc, "lineno", None)) from None

    def err(msg, section=None, key=None):
        return ConfigError(msg, source, lines.get((section, key)), section, key)

    declared = cp.get("run", "experiment", fallback=None)
    if declared is not None:
        declared = declared.strip()
        if declared not in EXPERIMENTS:
            raise err(f"unknown experiment {declared!r}; expected one of {EXPERIMENTS}",
                      "run", "experiment")
        if experiment is not None and declared != experiment:
            raise err(f"config is for {declared!r}, not {experiment!r}", "run", "experiment")
    kind = experiment or declared
    if kind is None:
        raise err("experiment not given", "run", "experiment")
    schema = SCHEMA[kind]

    for section in cp.sections():
        if section not in schema:
            raise err(f"unknown section for {kind!r}; allowed: {', '.join(schema)}", section)

    sections = {}
    for name, cls in schema.items():
        raw = dict(cp[name]) if cp.has_section(name) else {}
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise err(f"unknown key; allowed: {', '.join(sorted(known))}", name, key)
        try:
            sections[name] = dev.from_config(cls, raw, cls())
        except (UnitError, ValueError, TypeError) as exc:
            bad = next((k for k in raw if _bad_key(cls, k, raw[k])), None)
            raise err(str(exc), name, bad) from None
    sections["run"] = replace(sections["run"], experiment=kind)
    cfg = RunConfig(kind, sections, source, lines)
    _validate(cfg)
    return cfg


def _bad_key(cls, key, text) -> bool:
    kind = next(f.metadata["kind"] for f in fields(cls) if f.name == key)
    try:
        if str(text).strip().lower() != "none":
            parse_quantity(text, kind)
        return False
    except UnitError:
        return True


# --------------------------------------------------------------- validation

SWEEP_AXES = {"device": {"phi_sq": "flux", "phi_tr": "flux", "delta": "frequency"},
              "point": {"delta": "frequency", "dphi_tr": "flux"}}


def sweep_values(cfg: RunConfig):
    """(axis name, start, stop) of a spectrum sweep in internal units."""
    s = cfg["sweep"]
    kind = SWEEP_AXES[cfg["run"].model][s.axis]
    out = []
    for key in ("start", "stop"):
        try:
            out.append(parse_quantity(getattr(s, key), kind))
        except UnitError as exc:
            raise cfg.error(str(exc), "sweep", key) from None
    return s.axis, out[0], out[1]


def _validate(cfg: RunConfig):
    s = cfg.sections
    if "run" in s and cfg.experiment != "chevron":
        if s["run"].model not in ("device", "point"):
            raise cfg.error("model must be 'device' or 'point'", "run", "model")
        if s["run"].model == "point" and cfg.experiment == "fit":
            raise cfg.error("fits need the device model", "run", "model")
    if "truncation" in s:
        t = s["truncation"]
        for name in t.subsystems:
            if name not in SUBSYSTEM_NAMES:
                raise cfg.error(f"unknown subsystem {name!r}; use {', '.join(SUBSYSTEM_NAMES)}",
                                "truncation", "subsystems")
        if not t.subsystems:
            raise cfg.error("no subsystems selected", "truncation", "subsystems")
        for key in ("n_tr", "n_sq", "n_50"):
            if getattr(t, key) < 2:
                raise cfg.error("truncation must keep at least 2 levels", "truncation", key)
        if t.n_tr > s["transmon"].n_levels:
            raise cfg.error(f"n_tr exceeds transmon n_levels ({s['transmon'].n_levels})",
                            "truncation", "n_tr")
    if "sweep" in s:
        sw = s["sweep"]
        axes = SWEEP_AXES[s["run"].model]
        if sw.axis not in axes:
            raise cfg.error(f"axis must be one of {', '.join(axes)} for the "
                            f"{s['run'].model} model", "sweep", "axis")
        _, start, stop = sweep_values(cfg)
        if sw.points < 3 or start == stop:
            raise cfg.error("sweep range is empty (need start != stop and points >= 3)",
                            "sweep", "points" if sw.points < 3 else "stop")
        if sw.n_transitions < 1:
            raise cfg.error("need at least one transition", "sweep", "n_transitions")
        if sw.crossing:
            try:
                pair = tuple(int(x) for x in sw.crossing)
            except ValueError:
                pair = ()
            if len(pair) != 2 or pair[0] == pair[1] or max(pair) >= sw.n_transitions \
                    or min(pair) < 0:
                raise cfg.error("crossing needs two distinct branch indices below n_transitions",
                                "sweep", "crossing")
    if "probe" in s:
        p = s["probe"]
        if p.span <= 0 or p.points < 5:
            raise cfg.error("probe span must be positive with at least 5 points", "probe",
                            "span" if p.span <= 0 else "points")
        r = s["reflection"]
        if r.resonator not in ("squid", "r50"):
            raise cfg.error("resonator must be 'squid' or 'r50'", "reflection", "resonator")
        if min(r.kappa_ext, r.kappa_int, r.kappa_ext_50, r.kappa_int_50) < 0:
            raise cfg.error("decay rates must be non-negative", "reflection")
    if "chevron" in s:
        c = s["chevron"]
        if c.amplitude_points < 1 or c.plateau_points < 1:
            raise cfg.error("grid needs at least one point per axis", "chevron",
                            "amplitude_points" if c.amplitude_points < 1 else "plateau_points")
        if c.plateau_start < 0 or c.plateau_stop < c.plateau_start:
            raise cfg.error("plateau range must be non-negative and increasing", "chevron",
                            "plateau_stop")
        if c.filter_sigma <= 0:
            raise cfg.error("filter_sigma must be positive", "chevron", "filter_sigma")
        if not 0 < c.max_step <= 1.0:
            raise cfg.error("max_step must be in (0, 1] ns", "chevron", "max_step")
        if min(c.t1, c.t2star) <= 0 or c.gamma2 < 0:
            raise cfg.error("coherence times must be positive and gamma2 non-negative", "chevron")
        if 1.0 / c.t2star < 0.5 / c.t1:
            raise cfg.error("t2star > 2 t1 gives negative pure dephasing", "chevron", "t2star")
    if "fit" in s:
        f = s["fit"]
        dp = cfg.device()
        for name in f.free:
            try:
                val = dp.get(name)
            except (AttributeError, KeyError):
                raise cfg.error(f"unknown parameter {name!r} (use section_field names)",
                                "fit", "free") from None
            if not isinstance(val, float) or val == 0:
                raise cfg.error(f"{name} must be a non-zero real parameter", "fit", "free")
        if not f.free:
            raise cfg.error("no free parameters", "fit", "free")
        if not 0 < f.bound_rel < 1 or not 0 <= f.start_offset < f.bound_rel:
            raise cfg.error("need 0 <= start_offset < bound_rel < 1", "fit", "bound_rel")
        if f.points < 2 or f.phi_start >= f.phi_stop:
            raise cfg.error("flux range is empty", "fit", "points" if f.points < 2 else "phi_stop")

