import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridqed import device as dev
from hybridqed.hamiltonian import (TABLE_I, TABLE_II, BarePoint, ConvergenceError,
                                   DispersiveError, assemble, assemble_point, dispersive_exchange,
                                   dqd_basis_rotation, dqd_charge_hamiltonian, rabi_mixing_angle,
                                   solve_transmon, transmon_for_frequency)
from hybridqed.operators import DQD, R50, SQUID, TRANSMON, canonical_layout
from hybridqed.spectra import diagonalize

TR = dev.TransmonParams()


class TestTransmon:
    def test_decoupled_charge_states(self):
        sol = solve_transmon(TR, 0.0)
        ec = TR.e_c
        assert np.allclose(sol.levels, [0, 4 * ec, 4 * ec, 16 * ec])
        assert np.allclose(sol.n_matrix, np.diag(np.diag(sol.n_matrix)))

    def test_asymptotic_frequency_and_anharmonicity(self):
        sol = solve_transmon(TR, 30.0)
        approx = math.sqrt(8 * 0.243 * 30.0) - 0.243
        assert sol.omega01 == pytest.approx(approx, rel=0.02)
        assert sol.anharmonicity < 0
        assert sol.anharmonicity == pytest.approx(-0.243, rel=0.2)

    def test_charge_matrix_element(self):
        sol = solve_transmon(TR, 30.0)
        ratio = 30.0 / 0.243
        assert ratio == pytest.approx(123, abs=1)
        assert sol.n_matrix[0, 1] == pytest.approx((ratio / 8) ** 0.25 / math.sqrt(2), rel=0.05)

    def test_structure(self):
        sol = solve_transmon(TR, 15.0)
        assert sol.levels[0] == 0 and np.all(np.diff(sol.levels) > 0)
        assert np.allclose(sol.n_matrix, sol.n_matrix.T)
        assert all(sol.n_matrix[i, i + 1] > 0 for i in range(len(sol.levels) - 1))

    def test_offset_charge_insensitive(self):
        a = solve_transmon(dev.TransmonParams(n_g=0.0), 30.0).omega01
        b = solve_transmon(dev.TransmonParams(n_g=0.25), 30.0).omega01
        assert abs(a - b) < 1e-6

    def test_cutoff_checks(self):
        with pytest.raises(ValueError):
            solve_transmon(TR, 30.0, charge_cutoff=5)
        with pytest.raises(ConvergenceError):
            solve_transmon(TR, 5000.0, charge_cutoff=10)

    def test_inverse_problem(self):
        sol = transmon_for_frequency(TR, 3.695)
        assert sol.omega01 == pytest.approx(3.695, abs=1e-10)


class TestDqd:
    def test_sweet_spot(self):
        theta, plus, minus = dqd_basis_rotation(0.0, 1.0)
        assert theta == pytest.approx(math.pi / 2)
        assert np.allclose(np.abs(plus), 1 / math.sqrt(2))
        assert np.allclose(np.abs(minus), 1 / math.sqrt(2))

    def test_no_tunnelling(self):
        theta, plus, minus = dqd_basis_rotation(0.5, 0.0)
        assert theta == 0.0
        assert np.allclose(plus, [1, 0]) and np.allclose(np.abs(minus), [0, 1])

    @given(st.floats(-10, 10), st.floats(0.01, 5))
    def test_rotation_diagonalizes(self, delta, t_c):
        _, plus, minus = dqd_basis_rotation(delta, t_c)
        u = np.column_stack([plus, minus])
        h = u.T @ dqd_charge_hamiltonian(delta, t_c) @ u
        gap = math.hypot(delta, 2 * t_c)
        assert abs(h[0, 1]) < 1e-12
        assert h[0, 0] - h[1, 1] == pytest.approx(gap, rel=1e-12)


class TestPerturbative:
    def test_symmetric_case(self):
        assert dispersive_exchange(0.1, 0.1, 0.5, 0.5) == pytest.approx(0.1 ** 2 * (2 / 0.5))

    def test_table_ii_value(self):
        two_j = dispersive_exchange(0.128, 0.036, 4.062 - 3.695, 4.062 - 3.635)
        assert two_j == pytest.approx(0.023, abs=0.001)

    def test_linear_in_each_coupling(self):
        base = dispersive_exchange(0.1, 0.03, 0.3, 0.4)
        assert dispersive_exchange(0.2, 0.03, 0.3, 0.4) == pytest.approx(2 * base)
        assert dispersive_exchange(0.1, 0.09, 0.3, 0.4) == pytest.approx(3 * base)
        with pytest.raises(DispersiveError):
            dispersive_exchange(0.1, 0.1, 0.0, 0.3)

    def test_mixing_angle(self):
        assert rabi_mixing_angle(0.1, 0.0) == pytest.approx(math.pi / 4)
        assert rabi_mixing_angle(1e-9, 0.3) == pytest.approx(0.0, abs=1e-8)
        theta = rabi_mixing_angle(0.166, 4.150 - 4.230)
        assert theta == pytest.approx(0.5 * math.atan(2 * 0.166 / 0.080))
        assert theta == pytest.approx(0.672, abs=0.01)


def _solution():
    return solve_transmon(TR, 20.0)


class TestAssembly:
    def test_uncoupled_spectrum_is_sum_of_bare_levels(self):
        sol = _solution()
        pt = BarePoint(3.9, sol, 4.2, 6.49, 0.0, 0.0, 0.0)
        lay = canonical_layout(n_tr=4, n_sq=3, n_50=2)
        ev = np.linalg.eigvalsh(assemble_point(pt, lay).h.entries)
        sums = sorted(d + t + s * 4.2 + b * 6.49 for d in (0, 3.9) for t in sol.levels
                      for s in range(3) for b in range(2))
        assert np.allclose(ev, sums, atol=1e-12)

    def test_jaynes_cummings_splitting(self):
        g = 0.033
        pt = BarePoint(4.089, _solution(), 4.089, 6.49, g, 0.0, 0.0)
        lay = canonical_layout(include=(DQD, SQUID))
        es = diagonalize(assemble_point(pt, lay), 2)
        assert es.frequencies[1] - es.frequencies[0] == pytest.approx(2 * g, abs=1e-12)
        assert np.allclose(es.weight_sq, 0.5, atol=1e-12)

    @given(st.floats(-0.3, 0.3), st.floats(0.1, 0.2), st.floats(-1, 1), st.floats(0.5, 3))
    def test_hermitian_everywhere(self, phi_sq, phi_tr, delta, t_c):
        H = assemble(dev.DeviceParams(), dev.FluxBias(phi_sq, phi_tr), dev.DqdParams(t_c, delta),
                     canonical_layout(n_sq=3, n_50=2))
        assert H.h.hermiticity_error() < 1e-10

    def test_bloch_siegert_ground_shift_small(self):
        H = TABLE_II.hamiltonian(0.0)
        e0 = np.linalg.eigvalsh(H.h.entries)[0]
        pt = H.point
        n01 = pt.transmon.n_matrix[0, 1]
        scale = (pt.g_tr_sq * n01) ** 2 / pt.omega_sq + (pt.g_tr_50 * n01) ** 2 / pt.omega_50
        assert e0 < 0 and abs(e0) <= 1.5 * scale

    def test_truncation_convergence(self):
        for point, delta in ((TABLE_II, 0.3736), (TABLE_I, 0.3657)):
            small = point.hamiltonian(delta, 0.0, canonical_layout(n_sq=5, n_50=3))
            large = point.hamiltonian(delta, 0.0, canonical_layout(n_sq=7, n_50=4))
            a = diagonalize(small, 6).frequencies
            b = diagonalize(large, 6).frequencies
            assert np.max(np.abs(a[:4] - b[:4])) < 1e-4


class TestOperatingPoint:
    def test_tabulated_values_reproduced(self):
        pt = TABLE_II.bare(0.0)
        assert pt.transmon.omega01 == pytest.approx(3.695, abs=1e-9)
        assert (pt.omega_dqd, pt.omega_sq, pt.g_tr_sq, pt.g_dqd_sq, pt.g_tr_50) == \
            pytest.approx((3.635, 4.062, 0.128, 0.036, 0.093))

    def test_detuning_mixing_factor(self):
        pt = TABLE_I.bare(0.5)
        w = math.hypot(3.993, 0.5)
        assert pt.omega_dqd == pytest.approx(w)
        assert pt.g_dqd_sq == pytest.approx(0.034 * 3.993 / w)

    def test_flux_excursion_tunes_transmon(self):
        up = TABLE_II.bare(0.0, -0.005).transmon.omega01
        down = TABLE_II.bare(0.0, 0.005).transmon.omega01
        assert up > 3.695 > down
        assert TABLE_II.bare(0.0, 0.005).g_tr_sq < 0.128

    def test_layout_excluding_subsystems(self):
        lay = canonical_layout(include=(TRANSMON, R50))
        H = TABLE_II.hamiltonian(0.0, 0.0, lay)
        assert H.layout == lay and H.h.dim == 12
