import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridqed import device as dev
from hybridqed.hamiltonian import solve_transmon, transmon_for_frequency

SQ = dev.SquidArrayParams()
TR = dev.TransmonParams()
CP = dev.CouplingParams()


def test_phase_from_offset_only():
    assert dev.total_flux_sq(SQ, dev.FluxBias(0.0, 0.0)) == pytest.approx(2 * math.pi * 0.0072)


def test_array_frequency_zero_flux():
    p = dev.SquidArrayParams(phi_c=0.0)
    assert dev.squid_array_frequency(p, dev.FluxBias(0, 0)) == pytest.approx(7.867 / math.sqrt(1.1))
    assert dev.squid_array_frequency(p, dev.FluxBias(0, 0)) == pytest.approx(7.501, abs=1e-3)


def test_array_frequency_maximal_at_zero_argument_and_vanishes_at_quarter():
    top = -SQ.phi_c / SQ.gamma
    f_top = dev.squid_array_frequency(SQ, dev.FluxBias(top, 0))
    assert f_top == pytest.approx(SQ.omega0 / math.sqrt(1 + SQ.beta))
    phis = top + np.linspace(0, 0.25 / SQ.gamma, 200)
    f = [dev.squid_array_frequency(SQ, dev.FluxBias(x, 0)) for x in phis]
    assert np.all(np.diff(f) < 0)
    assert f[-1] == pytest.approx(0.0, abs=1e-6)


def test_beta_zero_reduces_to_sqrt_cos():
    p = dev.SquidArrayParams(beta=0.0)
    b = dev.FluxBias(0.3, 0)
    c = abs(math.cos(dev.total_flux_sq(p, b)))
    assert dev.squid_array_frequency(p, b) == pytest.approx(p.omega0 * math.sqrt(c))


def test_fig3_operating_point_root():
    phi = dev.flux_for_squid_frequency(SQ, 4.060)
    assert 0 < phi < 0.5
    assert dev.squid_array_frequency(SQ, dev.FluxBias(phi, 0)) == pytest.approx(4.060, abs=1e-9)


def test_transmon_frequency_asymptote():
    p = dev.TransmonParams(omega_pl=None)
    assert dev.transmon_frequency(p, dev.FluxBias(0, 0)) == pytest.approx(7.394, abs=1e-3)
    # the SQUID cosine vanishes at phase argument 1/4: finite, tends to -E_c
    assert dev.transmon_frequency(p, dev.FluxBias(0, 0.25)) == pytest.approx(-p.e_c, abs=1e-6)


def test_plasma_frequency_overrides_e_j0():
    assert TR.plasma_frequency == 6.550
    assert TR.e_j_max == pytest.approx(6.55 ** 2 / (8 * 0.243))
    assert dev.TransmonParams(omega_pl=None).e_j_max == pytest.approx(30.0)


@pytest.mark.parametrize("t_c,delta,expected", [(3.993 / 2, 0, 3.993), (0, 0.7, 0.7),
                                                (1.8, 2.7, 4.5)])
def test_dqd_frequency(t_c, delta, expected):
    assert dev.dqd_frequency(dev.DqdParams(t_c, delta)) == pytest.approx(expected)


def _unit_cos_bias(p_sq):
    return dev.FluxBias(-p_sq.phi_c / p_sq.gamma, TR.alpha * p_sq.phi_c / p_sq.gamma)


def test_coupling_tr_sq_unit_case_and_half_flux():
    b = _unit_cos_bias(SQ)
    assert dev.coupling_tr_sq(CP, SQ, TR, b) == pytest.approx(0.230 / 1.1 ** 0.25)
    assert dev.coupling_tr_sq(CP, SQ, TR, b) == pytest.approx(0.2246, abs=1e-4)
    half = dev.FluxBias(b.phi_sq, b.phi_tr + 0.25)
    assert dev.coupling_tr_sq(CP, SQ, TR, half) < 1e-4 * CP.g0_tr_sq
    assert dev.coupling_tr_50(CP, TR, b) == pytest.approx(0.120)
    assert dev.coupling_tr_50(CP, TR, half) < 1e-4 * CP.g0_tr_50


def test_table_ii_couplings_from_flux_laws():
    """Biasing the fitted device to the second table's frequencies reproduces its couplings."""
    phi_sq = dev.flux_for_squid_frequency(SQ, 4.062)
    ratio = transmon_for_frequency(TR, 3.695).e_j / TR.e_j_max
    phi_tr = math.acos(ratio) / (2 * math.pi) - TR.alpha * phi_sq
    b = dev.FluxBias(phi_sq, phi_tr)
    assert solve_transmon(TR, dev.josephson_energy(TR, b)).omega01 == pytest.approx(3.695)
    assert dev.coupling_tr_sq(CP, SQ, TR, b) == pytest.approx(0.128, rel=0.02)
    assert dev.coupling_tr_50(CP, TR, b) == pytest.approx(0.093, rel=0.02)


def test_dqd_coupling_limits():
    b = dev.FluxBias(0.1, 0)
    sweet = dev.coupling_dqd_sq(CP, SQ, dev.DqdParams(2.0, 0.0), b)
    assert sweet == pytest.approx(CP.g0_dqd_sq / dev._inductance_factor(SQ, b) ** 0.25)
    assert dev.coupling_dqd_sq(CP, SQ, dev.DqdParams(2.0, 1e9), b) < 1e-9
    with pytest.raises(dev.MixingError):
        dev.coupling_dqd_sq(CP, SQ, dev.DqdParams(0.0, 0.0), b)


def test_dqd_coupling_33_mhz_at_4089():
    phi = dev.flux_for_squid_frequency(SQ, 4.089)
    g = dev.coupling_dqd_sq(CP, SQ, dev.DqdParams(2.0, 0.0), dev.FluxBias(phi, 0))
    assert 2 * g == pytest.approx(0.066, abs=1e-3)


def test_impedance():
    assert dev.squid_impedance(dev.SquidArrayParams(phi_c=0), dev.FluxBias(0, 0)) == 1.0
    phis = np.linspace(0, 0.25 / SQ.gamma - 1e-3, 100) - SQ.phi_c / SQ.gamma
    z = [dev.squid_impedance(SQ, dev.FluxBias(x, 0)) for x in phis]
    assert np.all(np.diff(z) > 0)


@given(st.floats(-0.5, 0.5), st.floats(0.01, 10))
def test_dqd_coupling_scales_as_inverse_sqrt_impedance(phi, t_c):
    d = dev.DqdParams(t_c, 0.0)
    b = dev.FluxBias(phi, 0)
    p0 = dev.SquidArrayParams(phi_c=0)
    g = dev.coupling_dqd_sq(CP, p0, d, b)
    g_ref = dev.coupling_dqd_sq(CP, p0, d, dev.FluxBias(0, 0))
    z = dev.squid_impedance(p0, b)
    if math.isfinite(z):
        assert g == pytest.approx(g_ref / math.sqrt(z), rel=1e-12)


@given(st.floats(-0.6, 0.6), st.floats(-5.0, 5.0))
def test_mixing_product_independent_of_detuning(phi, delta):
    b = dev.FluxBias(phi, 0.1)
    d0, d1 = dev.DqdParams(1.5, 0.0), dev.DqdParams(1.5, delta)
    lhs = dev.coupling_dqd_sq(CP, SQ, d1, b) * dev.dqd_frequency(d1)
    rhs = dev.coupling_dqd_sq(CP, SQ, d0, b) * dev.dqd_frequency(d0)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)


@given(st.floats(-2.0, 2.0), st.integers(-3, 3))
def test_flux_laws_even_and_periodic(x, k):
    sq = dev.SquidArrayParams(phi_c=0.0)
    b = dev.FluxBias(x, 0.05)
    b_neg = dev.FluxBias(-x, -0.05)
    shift = dev.FluxBias(x + k / sq.gamma, 0.05 - k * TR.alpha / sq.gamma)
    for fn in (lambda bb: dev.squid_array_frequency(sq, bb),
               lambda bb: dev.transmon_frequency(TR, bb),
               lambda bb: dev.coupling_tr_sq(CP, sq, TR, bb),
               lambda bb: dev.coupling_tr_50(CP, TR, bb)):
        assert fn(b_neg) == pytest.approx(fn(b), rel=1e-9, abs=1e-9)
        assert fn(shift) == pytest.approx(fn(b), rel=1e-7, abs=1e-7)


def test_validity_window_smooth():
    phis = np.linspace(-0.3, 0.3, 301)
    f_sq = np.array([dev.squid_array_frequency(SQ, dev.FluxBias(x, 0.162)) for x in phis])
    f_tr = np.array([dev.transmon_frequency(TR, dev.FluxBias(x, 0.162)) for x in phis])
    assert np.all(np.isfinite(f_sq)) and np.all(np.isfinite(f_tr))
    assert np.max(np.abs(np.diff(f_sq, 2))) < 1e-2


def test_config_round_trip_and_unknown_keys():
    text = dev.to_config(SQ)
    assert text["omega0"] == "7.867 GHz"
    assert dev.from_config(dev.SquidArrayParams, text) == SQ
    with pytest.raises(KeyError):
        dev.from_config(dev.SquidArrayParams, {"omega_0": "7 GHz"})
    assert dev.from_config(dev.TransmonParams, {"omega_pl": "none"}).omega_pl is None


def test_kappa_presets_and_validation():
    assert dev.KAPPA_PRESETS["undercoupled"] == (0.004, 0.008)
    with pytest.raises(ValueError):
        dev.SquidArrayParams(kappa_int=-1)
    with pytest.raises(ValueError):
        dev.FluxBias(float("nan"), 0)
    assert dev.DeviceParams().with_values(squid_beta=0.2).squid.beta == 0.2
    with pytest.raises(KeyError):
        dev.DeviceParams().with_values(bogus_x=1)
