"""Lindblad dynamics of the transmon / DQD pair in the dispersive two-level picture.

Times are in ns and frequencies in GHz; a frequency f enters the generator
as the angular rate 2*pi*f (rad/ns).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .operators import DQD, TRANSMON, SpaceLayout, embed, pauli

TWO_PI = 2.0 * math.pi
QUBIT_PAIR = SpaceLayout((2, 2), (DQD, TRANSMON))


class IntegratorError(RuntimeError):
    """Density matrix lost positivity."""


class StepSizeError(IntegratorError):
    """Trace drifted; the time step is too large."""


@dataclass
class LindbladModel:
    hamiltonian_of_t: Callable[[float], np.ndarray]    # rad/ns
    collapse_ops: list[tuple[np.ndarray, float]]        # (L, rate in 1/ns)

    def __post_init__(self):
        for _, rate in self.collapse_ops:
            if rate < 0:
                raise ValueError("collapse rates must be non-negative")

    def rhs(self, t: float, rho: np.ndarray) -> np.ndarray:
        h = self.hamiltonian_of_t(t)
        out = -1j * (h @ rho - rho @ h)
        for op, rate in self.collapse_ops:
            if rate:
                ldl = op.conj().T @ op
                out += rate * (op @ rho @ op.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
        return out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray           # (n_times, d, d)

    def expect(self, op: np.ndarray) -> np.ndarray:
        return np.einsum("ij,tji->t", op, self.states).real


def rk4(rhs, y0: np.ndarray, t0: float, h: float, n_steps: int, on_step=None) -> np.ndarray:
    """Classical fixed-step Runge-Kutta; `on_step(n, y)` is called after each step."""
    y = y0
    t = t0
    for n in range(1, n_steps + 1):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + n * h
        if on_step is not None:
            on_step(n, y)
    return y


def check_state(rho: np.ndarray, trace_tol: float = 1e-6, neg_tol: float = 1e-7):
    """Raise when a density matrix (or a batch) drifted in trace or positivity."""
    rho = np.asarray(rho)
    tr = np.trace(rho, axis1=-2, axis2=-1)
    drift = float(np.max(np.abs(tr - 1.0)))
    if drift > trace_tol:
        raise StepSizeError(f"trace drift {drift:.3g} exceeds {trace_tol:g}")
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    low = float(np.min(np.linalg.eigvalsh(herm)))
    if low < -neg_tol:
        raise IntegratorError(f"density matrix eigenvalue {low:.3g} below -{neg_tol:g}")


def evolve(model: LindbladModel, rho0: np.ndarray, t_grid: Sequence[float],
           max_step: float = 0.05) -> Trajectory:
    """Integrate the master equation and return rho at every time in `t_grid`."""
    rho0 = np.asarray(rho0, dtype=complex)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10:
        raise ValueError("rho0 must be Hermitian")
    if abs(np.trace(rho0) - 1) > 1e-10 or np.min(np.linalg.eigvalsh(rho0)) < -1e-10:
        raise ValueError("rho0 must be a unit-trace positive semidefinite matrix")
    states = [rho0]
    rho = rho0
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        n = max(1, math.ceil((t1 - t0) / max_step - 1e-9))
        rho = rk4(model.rhs, rho, t0, (t1 - t0) / n, n)
        states.append(rho)
    states = np.array(states)
    check_state(states)
    return Trajectory(t_grid, states)


# ------------------------------------------------------ qubit-pair model

def _ops():
    sp_t = embed(pauli("plus"), TRANSMON, QUBIT_PAIR).entries
    sp_d = embed(pauli("plus"), DQD, QUBIT_PAIR).entries
    return sp_t, sp_d


def transmon_excited_projector() -> np.ndarray:
    sp_t, _ = _ops()
    return sp_t @ sp_t.conj().T


def initial_state() -> np.ndarray:
    """Transmon excited, DQD ground (index 0 of each qubit is its excited state)."""
    psi = np.zeros(4, dtype=complex)
    psi[2] = 1.0        # |DQD ground> (x) |tr excited>
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class PairRates:
    two_j: float = 0.0216        # GHz
    t1: float = 185.0            # ns, transmon
    t2star: float = 127.0        # ns, transmon Ramsey
    gamma2: float = 0.0026       # GHz, DQD dephasing rate / 2pi

    @property
    def transmon_dephasing(self) -> float:
        """Pure dephasing rate 1/T2* - 1/(2 T1) in 1/ns."""
        g = (1.0 / self.t2star if self.t2star else 0.0) - (0.5 / self.t1 if self.t1 else 0.0)
        if g < -1e-15:
            raise ValueError("T2* > 2 T1 implies negative pure dephasing")
        return max(g, 0.0)

    def collapse_ops(self) -> list[tuple[np.ndarray, float]]:
        sp_t, sp_d = _ops()
        sz_t = embed(pauli("z"), TRANSMON, QUBIT_PAIR).entries
        sz_d = embed(pauli("z"), DQD, QUBIT_PAIR).entries
        return [
            (sp_t.conj().T, 1.0 / self.t1 if self.t1 else 0.0),
            (sz_t, 0.5 * self.transmon_dephasing),
            (sz_d, 0.5 * TWO_PI * self.gamma2),
        ]


def exchange_hamiltonian(detuning: float, two_j: float) -> np.ndarray:
    """Rotating-frame pair Hamiltonian (rad/ns) for transmon-DQD detuning in GHz."""
    sp_t, sp_d = _ops()
    hop = sp_t @ sp_d.conj().T
    return TWO_PI * (detuning * (sp_t @ sp_t.conj().T) + 0.5 * two_j * (hop + hop.conj().T))


def pair_model(rates: PairRates, detuning_of_t: Callable[[float], float]) -> LindbladModel:
    return LindbladModel(lambda t: exchange_hamiltonian(detuning_of_t(t), rates.two_j),
                         rates.collapse_ops())


# ------------------------------------------------------------- flux pulse

@dataclass(frozen=True)
class LinearAmplitudeMap:
    """Transmon frequency (GHz) as a linear function of the normalized pulse amplitude."""
    resonant_amplitude: float = 0.6
    resonant_frequency: float = 3.660
    slope: float = 8 * 0.0216            # A in [0, 1] spans eight times 2J

    def __call__(self, a):
        return self.resonant_frequency + self.slope * (np.asarray(a) - self.resonant_amplitude)


@dataclass(frozen=True)
class PulseProtocol:
    amplitude: float                     # A / A0
    plateau: float                       # ns
    filter_sigma: float = 3.0            # ns
    prep_offset: float = 23.0            # ns between pi pulse and flux pulse
    amplitude_map: Callable = field(default_factory=LinearAmplitudeMap)
    omega_dqd: float = 3.660             # GHz
    tail: float = 4.0                    # readout this many sigma after the square pulse ends

    def __post_init__(self):
        if self.plateau < 0:
            raise ValueError("plateau must be non-negative")
        if self.filter_sigma <= 0:
            raise ValueError("filter_sigma must be positive")

    @property
    def t_on(self) -> float:
        return self.prep_offset

    @property
    def t_off(self) -> float:
        return self.prep_offset + self.plateau

    @property
    def readout_time(self) -> float:
        return self.t_off + self.tail * self.filter_sigma


def pulse_envelope(t, t_on, t_off, sigma):
    """Unit square on [t_on, t_off] convolved with a unit-area Gaussian."""
    t = np.asarray(t, dtype=float)
    r = math.sqrt(2.0) * sigma
    return 0.5 * (erf((t - t_on) / r) - erf((t - t_off) / r))


def shape_flux_pulse(p: PulseProtocol, t_grid) -> np.ndarray:
    """Transmon-DQD detuning (GHz) along `t_grid`."""
    s = pulse_envelope(t_grid, p.t_on, p.t_off, p.filter_sigma)
    return np.asarray(p.amplitude_map(p.amplitude * s), dtype=float) - p.omega_dqd


# ---------------------------------------------------------------- chevron

def _superop(h, collapse):
    """Row-major vectorized Liouvillian: vec(A rho B) = (A kron B^T) vec(rho)."""
    d = h.shape[0]
    eye = np.eye(d)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in collapse:
        ldl = op.conj().T @ op
        lv += rate * (np.kron(op, op.conj()) - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T)))
    return lv


@dataclass
class ChevronResult:
    amplitudes: np.ndarray
    plateaus: np.ndarray
    population: np.ndarray       # (n_amplitudes, n_plateaus)
    metadata: dict

    def header(self) -> list[str]:
        return ["amplitude"] + [f"plateau_{t:g}ns" for t in self.plateaus]

    def rows(self):
        for a, row in zip(self.amplitudes, self.population):
            yield [a, *row]


def _common_step(times, max_step):
    for k in range(1, 1001):
        h = max_step / k
        n = np.asarray(times) / h
        if np.all(np.abs(n - np.round(n)) < 1e-6):
            return h, np.round(n).astype(int)
    raise ValueError("readout times share no step <= max_step / 1000")


def run_chevron(rates: PairRates, amplitudes: Sequence[float], plateaus: Sequence[float],
                filter_sigma: float = 3.0, prep_offset: float = 23.0,
                amplitude_map: Callable | None = None, omega_dqd: float = 3.660,
                max_step: float = 0.05, threads: int = 1) -> ChevronResult:
    """Transmon excited population after each (amplitude, plateau) flux pulse.

    All cells are integrated together as one batch of vectorized density
    matrices; each cell is read out at its own pulse end.
    """
    amap = amplitude_map or LinearAmplitudeMap(resonant_frequency=omega_dqd,
                                               slope=8 * rates.two_j)
    amps = np.asarray(amplitudes, dtype=float)
    taus = np.asarray(plateaus, dtype=float)
    if np.any(taus < 0):
        raise ValueError("plateaus must be non-negative")
    if threads > 1 and len(amps) > 1:
        from concurrent.futures import ThreadPoolExecutor
        chunks = [c for c in np.array_split(amps, min(threads, len(amps))) if len(c)]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda c: run_chevron(rates, c, taus, filter_sigma, prep_offset,
                                                        amap, omega_dqd, max_step), chunks))
        meta = dict(parts[0].metadata)
        meta["max_trace_error"] = max(p.metadata["max_trace_error"] for p in parts)
        meta["min_eigenvalue"] = min(p.metadata["min_eigenvalue"] for p in parts)
        return ChevronResult(amps, taus, np.vstack([p.population for p in parts]), meta)
    protos = [PulseProtocol(0.0, float(t), filter_sigma, prep_offset, amap, omega_dqd)
              for t in taus]
    t_read = np.array([p.readout_time for p in protos])
    h, n_read = _common_step(t_read, max_step)

    A, T = np.meshgrid(amps, taus, indexing="ij")
    A, T = A.ravel(), T.ravel()
    cell_read = np.tile(n_read, len(amps))
    collapse = rates.collapse_ops()
    l0 = _superop(exchange_hamiltonian(0.0, rates.two_j), collapse)
    l1 = np.diag(_superop(exchange_hamiltonian(1.0, rates.two_j), []) -
                 _superop(exchange_hamiltonian(0.0, rates.two_j), []))
    l0t = l0.T.copy()
    t_on, t_off = prep_offset, prep_offset + T

    def rhs(t, y):
        s = pulse_envelope(t, t_on, t_off, filter_sigma)
        det = np.asarray(amap(A * s), dtype=float) - omega_dqd
        return y @ l0t + det[:, None] * (y * l1[None, :])

    y0 = np.tile(initial_state().ravel(), (len(A), 1))
    out = np.empty_like(y0)
    order = np.argsort(cell_read)
    pending = [0]

    def record(n, y):
        i = pending[0]
        while i < len(order) and cell_read[order[i]] == n:
            out[order[i]] = y[order[i]]
            i += 1
        pending[0] = i

    record(0, y0)
    rk4(rhs, y0, 0.0, h, int(cell_read.max()), record)
    rho = out.reshape(-1, 4, 4)
    check_state(rho)
    proj = transmon_excited_projector()
    pop = np.einsum("ij,cji->c", proj, rho).real.reshape(len(amps), len(taus))
    meta = {
        "two_j_ghz": rates.two_j, "t1_ns": rates.t1, "t2star_ns": rates.t2star,
        "gamma2_ghz": rates.gamma2, "filter_sigma_ns": filter_sigma,
        "prep_offset_ns": prep_offset, "omega_dqd_ghz": omega_dqd, "step_ns": h,
        "max_trace_error": float(np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - 1))),
        "min_eigenvalue": float(np.min(np.linalg.eigvalsh(rho))),
        "readout_tail_sigma": protos[0].tail if protos else None,
        "amplitude_map": {"resonant_amplitude": getattr(amap, "resonant_amplitude", None),
                          "resonant_frequency_ghz": getattr(amap, "resonant_frequency", None),
                          "slope_ghz": getattr(amap, "slope", None)},
    }
    return ChevronResult(amps, taus, pop, meta)


def purcell_rate(g: float, kappa_tot: float, delta: float) -> float:
    """Resonator-induced qubit decay kappa g^2 / Delta^2 (units of kappa)."""
    if delta == 0:
        raise ValueError("Purcell estimate needs a nonzero detuning")
    return kappa_tot * g * g / (delta * delta)


def oscillation_frequency(t, p) -> float:
    """Dominant frequency (GHz) of a damped oscillation sampled on a uniform grid.

    The FFT peak of the detrended trace seeds a least-squares fit of a damped
    cosine riding on an exponentially relaxing baseline.
    """
    from scipy.optimize import curve_fit

    t = np.asarray(t, float)
    p = np.asarray(p, float)
    dt = t[1] - t[0]
    span = t[-1] - t[0]
    y = p - np.polyval(np.polyfit(t, p, 4), t)
    n = 16 * len(y)
    spec = np.abs(np.fft.rfft(y * np.hanning(len(y)), n))
    freqs = np.fft.rfftfreq(n, dt)
    spec[freqs < 2.0 / span] = 0.0        # what the polynomial detrend leaves behind
    f0 = freqs[int(np.argmax(spec))]

    def model(t, a, tau, f, ph, c, b, tb):
        return (a * np.exp(-(t - t[0]) / tau) * np.cos(TWO_PI * f * t + ph)
                + c + b * np.exp(-(t - t[0]) / tb))

    amp = float(np.ptp(y))
    best = None
    for ph in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                popt, _ = curve_fit(model, t, p, p0=[amp, span, f0, ph, p[-1], p[0] - p[-1], span],
                                    bounds=([0, 1.0, 0.5 * f0, -np.inf, -np.inf, -np.inf, 1.0],
                                            [np.inf, np.inf, 2 * f0, np.inf, np.inf, np.inf, np.inf]),
                                    maxfev=20000)
        except (RuntimeError, ValueError):
            continue
        cost = float(np.sum((model(t, *popt) - p) ** 2))
        if best is None or cost < best[0]:
            best = (cost, popt)
    if best is None:
        raise RuntimeError("damped-cosine fit did not converge")
    return abs(float(best[1][2]))
