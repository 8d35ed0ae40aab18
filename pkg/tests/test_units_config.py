import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridqed import config
from hybridqed.config import ConfigError, parse
from hybridqed.units import UnitError, format_quantity, parse_quantity


@pytest.mark.parametrize("text,kind,value", [
    ("243 MHz", "frequency", 0.243),
    ("6.55GHz", "frequency", 6.55),
    ("21.6 mhz", "frequency", 0.0216),
    ("10 kHz", "frequency", 1e-5),
    ("185 ns", "time", 185.0),
    ("0.25 us", "time", 250.0),
    ("0.162 phi0", "flux", 0.162),
    ("0.162", "flux", 0.162),
    ("90 deg", "angle", math.pi / 2),
    ("0.1", "number", 0.1),
    ("35", "integer", 35),
    ("a, b ,c", "list", ("a", "b", "c")),
    ("Yes", "bool", True),
])
def test_parse_quantity(text, kind, value):
    assert parse_quantity(text, kind) == pytest.approx(value)


@pytest.mark.parametrize("text,kind", [
    ("243", "frequency"), ("3 parsec", "frequency"), ("1 GHz", "number"), ("1.5", "integer"),
    ("abc", "time"), ("maybe", "bool"),
])
def test_parse_quantity_errors(text, kind):
    with pytest.raises(UnitError):
        parse_quantity(text, kind)


@given(st.floats(-1e6, 1e6, allow_nan=False), st.sampled_from(["frequency", "time", "flux",
                                                                  "angle", "number"]))
def test_format_round_trip(value, kind):
    assert parse_quantity(format_quantity(value, kind), kind) == pytest.approx(value, rel=1e-11,
                                                                              abs=1e-300)


def test_defaults_resolve():
    cfg = parse("[run]\nexperiment = chevron\n")
    assert cfg.experiment == "chevron"
    assert cfg["chevron"].two_j == pytest.approx(0.0216)
    resolved = cfg.resolved()
    assert resolved["chevron"]["t1"] == "185 ns"


def test_unknown_key_reports_line():
    text = "[run]\nexperiment = spectrum\n\n[squid]\nomega0 = 7.8 GHz\nbetta = 0.1\n"
    with pytest.raises(ConfigError) as info:
        parse(text, "x.cfg")
    assert info.value.line == 6 and info.value.key == "betta"
    assert "x.cfg:6" in str(info.value)


def test_unknown_section_and_experiment_mismatch():
    with pytest.raises(ConfigError, match="unknown section"):
        parse("[run]\nexperiment = chevron\n[squid]\nbeta = 0.1\n")
    with pytest.raises(ConfigError, match="not 'fit'"):
        parse("[run]\nexperiment = chevron\n", experiment="fit")
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse("[run]\nexperiment = ramsey\n")


def test_missing_unit_is_config_error():
    with pytest.raises(ConfigError) as info:
        parse("[run]\nexperiment = rabi\n[probe]\ncenter = 4.089\n")
    assert info.value.key == "center" and info.value.line == 4


def test_empty_sweep_rejected_before_compute():
    text = "[run]\nexperiment = spectrum\nmodel = point\n[sweep]\nstart = 0.2 GHz\nstop = 0.2 GHz\n"
    with pytest.raises(ConfigError, match="empty"):
        parse(text)


def test_sweep_axis_must_match_model():
    text = "[run]\nexperiment = spectrum\nmodel = point\n[sweep]\naxis = phi_sq\n"
    with pytest.raises(ConfigError, match="axis"):
        parse(text)


def test_fit_free_parameter_names_checked():
    with pytest.raises(ConfigError, match="unknown parameter"):
        parse("[run]\nexperiment = fit\n[fit]\nfree = squid_omega0, squid_omegaX\n")


def test_resolved_config_round_trips():
    for name in config.preset_names():
        cfg = config.load(name)
        again = parse(cfg.to_ini(), experiment=cfg.experiment)
        assert again.resolved() == cfg.resolved()


def test_presets_exist():
    names = set(config.preset_names())
    assert {"table1", "table2", "table3", "fig3e", "fig3d", "rabi_dqd", "rabi_tr",
            "fit_roundtrip", "fig2"} <= names
    with pytest.raises(ConfigError):
        config.resolve_path("no_such_preset")


def test_inline_comments_allowed():
    cfg = parse("[run]\nexperiment = spectrum\nmodel = point   # tabulated\n"
                "[sweep]\nstop = 0.5 GHz ; upper end\ncrossing = 0, 1  # pair\n")
    assert cfg["run"].model == "point"
    assert cfg["sweep"].crossing == ("0", "1")
    assert config.sweep_values(cfg)[2] == pytest.approx(0.5)
