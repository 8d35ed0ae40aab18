"""Eigen-spectrum sweeps, avoided crossings and one-port reflection spectra."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hamiltonian import SystemHamiltonian, excitation_number, photon_lowering
from .operators import R50, SQUID

log = logging.getLogger(__name__)

N_PROBE_DEFAULT = 2001


class CrossingNotFound(ValueError):
    pass


@dataclass
class SweepResult:
    axis_name: str
    axis: np.ndarray
    frequencies: np.ndarray      # (n_points, n_transitions), GHz, NaN where failed
    weight_sq: np.ndarray
    weight_50: np.ndarray
    errors: dict = field(default_factory=dict)

    @property
    def n_transitions(self) -> int:
        return self.frequencies.shape[1]

    def header(self) -> list[str]:
        cols = [self.axis_name]
        for k in range(self.n_transitions):
            cols += [f"transition_{k}_freq", f"transition_{k}_weight_sq",
                     f"transition_{k}_weight_50"]
        return cols

    def rows(self):
        for i, x in enumerate(self.axis):
            row = [x]
            for k in range(self.n_transitions):
                row += [self.frequencies[i, k], self.weight_sq[i, k], self.weight_50[i, k]]
            yield row


@dataclass(frozen=True)
class AvoidedCrossing:
    location: float
    gap: float                   # GHz
    branches: tuple[int, int]

    @property
    def gap_mhz(self) -> float:
        return 1e3 * self.gap


@dataclass(frozen=True)
class Eigensystem:
    frequencies: np.ndarray      # excited-state energies above the dressed ground
    vectors: np.ndarray          # columns: the corresponding eigenvectors
    weight_sq: np.ndarray
    weight_50: np.ndarray
    excitations: np.ndarray      # <N> of each state


def diagonalize(H: SystemHamiltonian, n_keep: int) -> Eigensystem:
    """Lowest `n_keep` ground-state transitions and their photonic weights."""
    layout = H.layout
    m = H.h.entries
    # real symmetric Hamiltonians diagonalize faster in real arithmetic
    vals, vecs = np.linalg.eigh(m.real if not np.any(m.imag) else m)
    if not np.all(np.isfinite(vals)):
        raise np.linalg.LinAlgError("non-finite eigenvalues")
    ground = vecs[:, 0]
    sel = slice(1, n_keep + 1)
    weights = {}
    for label in (SQUID, R50):
        if label in layout:
            ad_g = photon_lowering(layout, label).conj().T @ ground
            weights[label] = np.abs(vecs[:, sel].conj().T @ ad_g) ** 2
        else:
            weights[label] = np.zeros(vecs[:, sel].shape[1])
    number = excitation_number(layout)
    exc = np.einsum("ik,i,ik->k", vecs[:, sel].conj(), number, vecs[:, sel]).real
    return Eigensystem(vals[sel] - vals[0], vecs[:, sel], weights[SQUID], weights[R50], exc)


def single_excitation_transitions(H: SystemHamiltonian, n: int) -> np.ndarray:
    """Lowest `n` transitions into states with about one excitation (GHz)."""
    es = diagonalize(H, min(H.layout.total_dim - 1, 6 * n + 4))
    f = es.frequencies[np.abs(es.excitations - 1.0) < 0.5]
    if len(f) < n:
        raise ValueError(f"only {len(f)} single-excitation states found")
    return f[:n]


def sweep_spectrum(builder: Callable[[float], SystemHamiltonian], axis_name: str,
                   values: Sequence[float], n_transitions: int = 4, threads: int = 1,
                   track: bool = True, overlap_threshold: float = 0.5) -> SweepResult:
    """Diagonalize along a 1-D bias axis.

    Branches are followed by maximal eigenvector overlap with the previous
    point; a branch with no candidate above `overlap_threshold` falls back to
    frequency order among the unclaimed states.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0 or not np.all(np.isfinite(values)):
        raise ValueError("sweep axis must be a non-empty finite 1-D array")
    n_keep = n_transitions + 4

    def point(x):
        try:
            H = builder(float(x))
            return diagonalize(H, min(n_keep, H.layout.total_dim - 1)), None
        except Exception as exc:  # noqa: BLE001 - recorded per point
            return None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, values))
    else:
        results = [point(x) for x in values]

    n = len(values)
    freqs = np.full((n, n_transitions), np.nan)
    w_sq = np.full((n, n_transitions), np.nan)
    w_50 = np.full((n, n_transitions), np.nan)
    errors = {}
    prev = None
    for i, (es, err) in enumerate(results):
        if es is None:
            errors[i] = err
            log.warning("sweep point %s=%g failed: %s", axis_name, values[i], err)
            continue
        if es.frequencies.size < n_transitions:
            errors[i] = "fewer states than requested transitions"
            continue
        if track and prev is not None:
            order = _assign(prev, es.vectors, n_transitions, overlap_threshold)
        else:
            order = np.arange(n_transitions)
        freqs[i] = es.frequencies[order]
        w_sq[i] = es.weight_sq[order]
        w_50[i] = es.weight_50[order]
        prev = es.vectors[:, order]
    return SweepResult(axis_name, values, freqs, w_sq, w_50, errors)


def _assign(prev: np.ndarray, cur: np.ndarray, n: int, threshold: float) -> np.ndarray:
    overlap = np.abs(prev.conj().T @ cur) ** 2        # (n, n_candidates)
    order = np.full(n, -1)
    taken = set()
    for flat in np.argsort(overlap, axis=None)[::-1]:
        k, j = np.unravel_index(flat, overlap.shape)
        if overlap[k, j] < threshold:
            break
        if order[k] < 0 and j not in taken:
            order[k] = j
            taken.add(j)
    # unclaimed branches keep frequency order among themselves
    free = [j for j in range(cur.shape[1]) if j not in taken]
    for k in range(n):
        if order[k] < 0:
            order[k] = free.pop(0)
    return order


def find_avoided_crossing(sweep: SweepResult, branches: tuple[int, int] = (0, 1)
                          ) -> AvoidedCrossing:
    """Minimal gap between two branches, refined by a parabola through gap^2."""
    i, j = branches
    gap = np.abs(sweep.frequencies[:, j] - sweep.frequencies[:, i])
    ok = np.isfinite(gap)
    x, g = sweep.axis[ok], gap[ok]
    if len(g) < 3:
        raise CrossingNotFound("too few valid sweep points")
    k = int(np.argmin(g))
    if k == 0 or k == len(g) - 1:
        raise CrossingNotFound(
            f"gap between branches {branches} is smallest at the sweep edge; no crossing in range")
    xs, ys = x[k - 1:k + 2], g[k - 1:k + 2] ** 2
    a, b, c = np.polyfit(xs - x[k], ys, 2)
    if a > 0:
        x0 = -b / (2 * a)
        if abs(x0) <= max(abs(xs - x[k])):
            g2 = c - b * b / (4 * a)
            return AvoidedCrossing(float(x[k] + x0), float(np.sqrt(max(g2, 0.0))), (i, j))
    return AvoidedCrossing(float(x[k]), float(g[k]), (i, j))


# --------------------------------------------------------------- reflection

@dataclass(frozen=True)
class ReflectionSpec:
    probe: np.ndarray            # GHz, strictly increasing
    kappa_ext: float
    kappa_int: float
    multiplex_phase: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probe, dtype=float)
        if p.ndim != 1 or len(p) < 2 or np.any(np.diff(p) <= 0):
            raise ValueError("probe grid must be strictly increasing")
        if self.kappa_ext < 0 or self.kappa_int < 0:
            raise ValueError("decay rates must be non-negative")
        object.__setattr__(self, "probe", p)

    @property
    def kappa_tot(self) -> float:
        return self.kappa_ext + self.kappa_int


def probe_grid(center: float, span: float, n: int = N_PROBE_DEFAULT) -> np.ndarray:
    return np.linspace(center - span / 2, center + span / 2, n)


@dataclass(frozen=True)
class Trace:
    probe: np.ndarray
    s11: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.s11)


def reflection_s11(spec: ReflectionSpec, frequencies, weights) -> Trace:
    """Linear-response one-port reflection of a set of weighted transitions.

    S11 = 1 - sum_k kappa_ext w_k / (i (f_k - f_p) + kappa_tot / 2)
    """
    if spec.kappa_tot <= 0:
        raise ValueError("total linewidth must be positive")
    f = np.asarray(frequencies, dtype=float)[None, :]
    w = np.asarray(weights, dtype=float)[None, :]
    p = spec.probe[:, None]
    s = 1.0 - np.sum(spec.kappa_ext * w / (1j * (f - p) + 0.5 * spec.kappa_tot), axis=1)
    return Trace(spec.probe, s)


def s11_of(H: SystemHamiltonian, spec: ReflectionSpec, resonator: str = SQUID,
           n_transitions: int = 8) -> Trace:
    """Reflection off `resonator` for the dressed spectrum of H."""
    es = diagonalize(H, min(n_transitions, H.layout.total_dim - 1))
    w = es.weight_sq if resonator == SQUID else es.weight_50
    return reflection_s11(spec, es.frequencies, w)


def multiplexed_response(s11_sq: Trace, s11_50: Trace, phi: float) -> np.ndarray:
    """|S11_Sq + exp(i phi) S11_50| on a shared probe grid."""
    if s11_sq.probe.shape != s11_50.probe.shape or not np.allclose(s11_sq.probe, s11_50.probe,
                                                                   rtol=0, atol=1e-12):
        raise ValueError("multiplexed traces need identical probe grids")
    return np.abs(s11_sq.s11 + np.exp(1j * phi) * s11_50.s11)


@dataclass(frozen=True)
class RabiSplitting:
    trace: Trace
    fit: object                  # estimate.LorentzianFit
    splitting: float             # GHz, 0 when only one line is resolved
    linewidth: float             # mean FWHM, GHz
    resolved: bool


def vacuum_rabi_trace(H: SystemHamiltonian, spec: ReflectionSpec, resonator: str = SQUID
                      ) -> RabiSplitting:
    """|S11| at a resonant bias point and its two-Lorentzian splitting."""
    from .estimate import extract_dips, fit_lorentzians

    trace = s11_of(H, spec, resonator)
    mag = trace.magnitude
    dips = extract_dips(trace.probe, mag)
    if len(dips) < 2:
        fit = fit_lorentzians(trace.probe, mag, 1)
        return RabiSplitting(trace, fit, 0.0, float(fit.widths[0]), False)
    fit = fit_lorentzians(trace.probe, mag, 2)
    c = np.sort(fit.centers)
    return RabiSplitting(trace, fit, float(c[1] - c[0]), float(np.mean(fit.widths)),
                         not fit.ill_conditioned)
