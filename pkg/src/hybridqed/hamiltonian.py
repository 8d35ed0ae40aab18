"""System Hamiltonian of the DQD / transmon / two-resonator device.

Energies are in GHz (omega/2pi). The Hamiltonian is referenced to the bare
ground configuration, so its eigenvalues differences are directly the
transition frequencies seen in spectroscopy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import device as dev
from .operators import (DQD, R50, SQUID, TRANSMON, OperatorMatrix, SpaceLayout,
                        annihilation, canonical_layout, embed, pauli)


class ConvergenceError(RuntimeError):
    """Charge-basis truncation too small for the requested levels."""


class DispersiveError(ValueError):
    """Perturbative formula evaluated at zero detuning."""


@dataclass(frozen=True, eq=False)
class TransmonSolution:
    levels: np.ndarray      # ground-referenced, GHz
    n_matrix: np.ndarray    # <i|n|j> in the eigenbasis
    e_c: float
    e_j: float

    @property
    def omega01(self) -> float:
        return float(self.levels[1])

    @property
    def anharmonicity(self) -> float:
        return float(self.levels[2] - 2 * self.levels[1])


@lru_cache(maxsize=4096)
def _solve_charge_basis(e_c: float, e_j: float, n_g: float, cutoff: int, n_levels: int):
    n = np.arange(-cutoff, cutoff + 1, dtype=float)
    h = np.diag(4.0 * e_c * (n - n_g) ** 2)
    off = -0.5 * e_j * np.ones(2 * cutoff)
    h += np.diag(off, 1) + np.diag(off, -1)
    vals, vecs = np.linalg.eigh(h)
    edge = 4.0 * e_c * (cutoff - abs(n_g)) ** 2 - e_j
    top = vals[n_levels - 1]
    edge_weight = np.max(vecs[[0, -1], :n_levels] ** 2)
    if top >= 0.99 * edge or edge_weight > 1e-8:
        raise ConvergenceError(
            f"charge cutoff {cutoff} too small for {n_levels} levels at E_J/E_c={e_j / e_c:.3g}")
    vecs = vecs[:, :n_levels]
    nm = vecs.T @ (n[:, None] * vecs)
    for i in range(1, n_levels):
        if nm[i - 1, i] < 0:
            vecs[:, i] *= -1
            nm[i, :] *= -1
            nm[:, i] *= -1
    levels = vals[:n_levels] - vals[0]
    levels.setflags(write=False)
    nm.setflags(write=False)
    return levels, nm


def solve_transmon(p: dev.TransmonParams, e_j: float, charge_cutoff: int | None = None
                   ) -> TransmonSolution:
    """Diagonalize 4 E_c (n - n_g)^2 - E_J cos(phi) in the charge basis |n|<=N."""
    cutoff = p.charge_cutoff if charge_cutoff is None else charge_cutoff
    if cutoff < 10:
        raise ValueError(f"charge_cutoff must be >= 10, got {cutoff}")
    levels, nm = _solve_charge_basis(float(p.e_c), float(e_j), float(p.n_g), int(cutoff),
                                     int(p.n_levels))
    return TransmonSolution(levels, nm, p.e_c, e_j)


def transmon_for_frequency(p: dev.TransmonParams, omega01: float) -> TransmonSolution:
    """Transmon whose exact 0-1 transition equals `omega01` (E_J found by root search)."""
    def f(e_j):
        return solve_transmon(p, e_j).omega01 - omega01
    hi = (omega01 + 2.0 * p.e_c) ** 2 / (8.0 * p.e_c)
    e_j = brentq(f, 1e-3 * p.e_c, hi, xtol=1e-13, rtol=1e-14)
    return solve_transmon(p, e_j)


# --------------------------------------------------------------- DQD basis

def dqd_basis_rotation(delta: float, t_c: float):
    """Mixing angle and charge-basis eigenstates of delta/2 tau_z + t_c tau_x.

    Vectors are in the (|R>, |L>) basis. Returns ``(theta, plus, minus)`` with
    ``tan(theta) = 2 t_c / delta``.
    """
    if delta == 0 and t_c == 0:
        raise dev.MixingError("delta = t_c = 0: mixing angle undefined")
    theta = math.atan2(2.0 * t_c, delta)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    # the |L> phase is chosen so both vectors are eigenvectors for t_c > 0
    plus = np.array([c, s])
    minus = np.array([-s, c])
    return theta, plus, minus


def dqd_charge_hamiltonian(delta: float, t_c: float) -> np.ndarray:
    tz = np.diag([1.0, -1.0])
    tx = np.array([[0.0, 1.0], [1.0, 0.0]])
    return 0.5 * delta * tz + t_c * tx


# ------------------------------------------------------- perturbative forms

def dispersive_exchange(g1: float, g2: float, delta_tr: float, delta_dqd: float) -> float:
    """Resonator-mediated qubit-qubit exchange 2J = g1 g2 (1/|D_tr| + 1/|D_dqd|)."""
    if delta_tr == 0 or delta_dqd == 0:
        raise DispersiveError("dispersive exchange needs nonzero qubit-resonator detunings")
    return g1 * g2 * (1.0 / abs(delta_tr) + 1.0 / abs(delta_dqd))


def rabi_mixing_angle(g_tr_sq: float, delta_tr: float) -> float:
    """theta_m with tan(2 theta_m) = 2 g / |Delta|."""
    return 0.5 * math.atan2(2.0 * g_tr_sq, abs(delta_tr))


# ---------------------------------------------------------------- assembly

@dataclass(frozen=True, eq=False)
class BarePoint:
    """Bare frequencies and couplings (GHz) at one bias point."""
    omega_dqd: float
    transmon: TransmonSolution
    omega_sq: float
    omega_50: float
    g_dqd_sq: float
    g_tr_sq: float
    g_tr_50: float

    def summary(self) -> dict:
        return {
            "omega_dqd": self.omega_dqd,
            "omega_tr": self.transmon.omega01,
            "e_j": self.transmon.e_j,
            "omega_sq": self.omega_sq,
            "omega_50": self.omega_50,
            "g_dqd_sq": self.g_dqd_sq,
            "g_tr_sq": self.g_tr_sq,
            "g_tr_50": self.g_tr_50,
        }


@dataclass(frozen=True, eq=False)
class SystemHamiltonian:
    h: OperatorMatrix
    point: BarePoint
    bias: dict = field(default_factory=dict)

    @property
    def layout(self) -> SpaceLayout:
        return self.h.layout


def bare_point(device: dev.DeviceParams, bias: dev.FluxBias, dqd: dev.DqdParams) -> BarePoint:
    """Evaluate every flux/bias law of the device at one operating point."""
    tr = device.transmon
    return BarePoint(
        omega_dqd=dev.dqd_frequency(dqd),
        transmon=solve_transmon(tr, dev.josephson_energy(tr, bias)),
        omega_sq=dev.squid_array_frequency(device.squid, bias),
        omega_50=device.coupling.omega_r50,
        g_dqd_sq=dev.coupling_dqd_sq(device.coupling, device.squid, dqd, bias),
        g_tr_sq=dev.coupling_tr_sq(device.coupling, device.squid, tr, bias),
        g_tr_50=dev.coupling_tr_50(device.coupling, tr, bias),
    )


@lru_cache(maxsize=64)
def _static_terms(layout: SpaceLayout) -> dict:
    """Bias-independent operator products of a layout (read-only arrays)."""
    ops = {}
    if DQD in layout:
        sp = embed(pauli("plus"), DQD, layout).entries
        ops["dqd_number"] = sp @ sp.conj().T
    for label, key in ((SQUID, "a"), (R50, "b")):
        if label in layout:
            a = embed(annihilation(layout.dim(label)), label, layout).entries
            ops[key + "_number"] = a.conj().T @ a
            ops[key + "_quadrature"] = a + a.conj().T
            if key == "a" and DQD in layout:
                ops["dqd_sq"] = sp.conj().T @ a.conj().T + sp @ a
    for m in ops.values():
        m.setflags(write=False)
    return ops


def assemble_point(point: BarePoint, layout: SpaceLayout | None = None,
                   bias: dict | None = None) -> SystemHamiltonian:
    """Build H for the subsystems present in `layout` (canonical order)."""
    if layout is None:
        layout = canonical_layout(n_tr=len(point.transmon.levels))
    ops = _static_terms(layout)
    h = np.zeros((layout.total_dim,) * 2, dtype=complex)
    if DQD in layout:
        h += point.omega_dqd * ops["dqd_number"]
    if SQUID in layout:
        h += point.omega_sq * ops["a_number"]
    if R50 in layout:
        h += point.omega_50 * ops["b_number"]
    if "dqd_sq" in ops:
        h += point.g_dqd_sq * ops["dqd_sq"]
    if TRANSMON in layout:
        n_tr = layout.dim(TRANSMON)
        if n_tr > len(point.transmon.levels):
            raise ValueError(f"layout wants {n_tr} transmon levels, solution has "
                             f"{len(point.transmon.levels)}")
        h += embed(np.diag(point.transmon.levels[:n_tr]).astype(complex), TRANSMON, layout).entries
        n_op = embed(point.transmon.n_matrix[:n_tr, :n_tr].astype(complex), TRANSMON,
                     layout).entries
        if SQUID in layout:
            h += point.g_tr_sq * n_op @ ops["a_quadrature"]
        if R50 in layout:
            h += point.g_tr_50 * n_op @ ops["b_quadrature"]
    return SystemHamiltonian(OperatorMatrix(layout, h), point, dict(bias or {}))


def assemble(device: dev.DeviceParams, bias: dev.FluxBias, dqd: dev.DqdParams,
             layout: SpaceLayout | None = None) -> SystemHamiltonian:
    point = bare_point(device, bias, dqd)
    snapshot = {"phi_sq": bias.phi_sq, "phi_tr": bias.phi_tr, "t_c": dqd.t_c, "delta": dqd.delta}
    return assemble_point(point, layout, snapshot)


@lru_cache(maxsize=64)
def excitation_number(layout: SpaceLayout) -> np.ndarray:
    """Total excitation count: DQD excitation + transmon level + photons."""
    n = np.zeros(layout.total_dim)
    for k, (label, d) in enumerate(zip(layout.labels, layout.subsystem_dims)):
        local = np.arange(d, dtype=float)
        if label == DQD:
            local = np.array([1.0, 0.0])   # index 0 is the excited state
        shape = [1] * len(layout.labels)
        shape[k] = d
        n = n + np.broadcast_to(local.reshape(shape), layout.subsystem_dims).ravel()
    n.setflags(write=False)
    return n


@lru_cache(maxsize=64)
def photon_lowering(layout: SpaceLayout, label: str) -> np.ndarray:
    return embed(annihilation(layout.dim(label)), label, layout).entries


# ------------------------------------------------------ tabulated operating points

@dataclass(frozen=True)
class OperatingPoint:
    """Operating point given directly by its bare frequencies and couplings (GHz).

    The transmon is realised by the exact charge-basis model with E_J chosen to
    hit `omega_tr`. `g_dqd_sq` is the sweet-spot value; away from it the mixing
    factor 2 t_c / omega_DQD applies. A transmon flux excursion ``dphi_tr``
    (flux quanta) rescales E_J by |cos| and both transmon couplings by |cos|^(1/4),
    anchored so that ``dphi_tr = 0`` reproduces the tabulated values.
    """
    two_t_c: float
    omega_tr: float
    omega_sq: float
    g_tr_sq: float
    g_dqd_sq: float
    g_tr_50: float
    omega_50: float = 6.490
    transmon: dev.TransmonParams = field(default_factory=dev.TransmonParams)

    def _anchor(self) -> TransmonSolution:
        return transmon_for_frequency(self.transmon, self.omega_tr)

    def anchor_phase(self) -> float:
        """Transmon SQUID phase (rad) realising the tabulated E_J."""
        ratio = self._anchor().e_j / self.transmon.e_j_max
        if ratio > 1:
            raise ValueError("tabulated transmon frequency exceeds the zero-flux maximum")
        return math.acos(ratio)

    def bare(self, delta: float = 0.0, dphi_tr: float = 0.0) -> BarePoint:
        anchor = self._anchor()
        t_c = 0.5 * self.two_t_c
        w_dqd = math.hypot(self.two_t_c, delta)
        if w_dqd == 0:
            raise dev.MixingError("DQD splitting vanishes")
        if dphi_tr == 0.0:
            tr, scale = anchor, 1.0
        else:
            phase0 = self.anchor_phase()
            ratio = abs(math.cos(phase0 + dev.TWO_PI * dphi_tr)) / math.cos(phase0)
            tr = solve_transmon(self.transmon, anchor.e_j * ratio)
            scale = ratio ** 0.25
        return BarePoint(
            omega_dqd=w_dqd,
            transmon=tr,
            omega_sq=self.omega_sq,
            omega_50=self.omega_50,
            g_dqd_sq=self.g_dqd_sq * (2.0 * t_c / w_dqd),
            g_tr_sq=self.g_tr_sq * scale,
            g_tr_50=self.g_tr_50 * scale,
        )

    def hamiltonian(self, delta: float = 0.0, dphi_tr: float = 0.0,
                    layout: SpaceLayout | None = None) -> SystemHamiltonian:
        return assemble_point(self.bare(delta, dphi_tr), layout,
                              {"delta": delta, "dphi_tr": dphi_tr})


# the three tabulated operating points
TABLE_I = OperatingPoint(3.993, 4.150, 4.230, 0.166, 0.034, 0.098)
TABLE_II = OperatingPoint(3.635, 3.695, 4.062, 0.128, 0.036, 0.093)
TABLE_III = OperatingPoint(3.638, 3.695, 4.062, 0.128, 0.036, 0.093)
