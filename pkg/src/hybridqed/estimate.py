"""Dip extraction, Lorentzian line fits and device-parameter fits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.signal import find_peaks

from . import device as dev
from .hamiltonian import assemble
from .operators import R50, SQUID, TRANSMON, SpaceLayout, canonical_layout
from .spectra import single_excitation_transitions

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# ----------------------------------------------------------------- line fits

@dataclass(frozen=True)
class LorentzianFit:
    centers: np.ndarray
    widths: np.ndarray           # FWHM
    depths: np.ndarray
    baseline: float
    residual: float              # RMS, same units as the trace
    ill_conditioned: bool = False

    def model(self, x):
        return _dip_model(np.asarray(x, float), self.baseline, self.centers, self.widths,
                          self.depths)


def _dip_model(x, base, centers, widths, depths):
    y = np.full_like(x, base, dtype=float)
    for c, w, d in zip(centers, widths, depths):
        y -= d / (1.0 + ((x - c) / (0.5 * w)) ** 2)
    return y


def extract_dips(freq, mag, prominence: float | None = None) -> np.ndarray:
    """Local minima of a trace, refined by 3-point parabolic interpolation.

    The default prominence threshold is a tenth of the trace's full range, so a
    flat trace yields no dips.
    """
    x = np.asarray(freq, dtype=float)
    y = np.asarray(mag, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ValueError("frequency grid must be increasing")
    span = float(np.ptp(y)) if len(y) else 0.0
    if prominence is None:
        prominence = 0.1 * span
    if span <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return np.array([])
    idx, _ = find_peaks(-y, prominence=prominence)
    out = []
    for i in idx:
        if 0 < i < len(y) - 1:
            y0, y1, y2 = y[i - 1], y[i], y[i + 1]
            denom = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
            out.append(x[i] + shift * (x[i + 1] - x[i - 1]) / 2)
        else:
            out.append(x[i])
    return np.array(out)


def fit_lorentzians(freq, mag, n_peaks: int, n_starts: int = 8, seed: int = 0) -> LorentzianFit:
    """Least-squares fit of a baseline minus `n_peaks` Lorentzian dips.

    Multi-start from deterministic jitter around the deepest extracted dips;
    the trace is normalized first so the result does not depend on its scale.
    """
    if n_peaks not in (1, 2):
        raise ValueError("n_peaks must be 1 or 2")
    x = np.asarray(freq, dtype=float)
    y = np.asarray(mag, dtype=float)
    if len(x) < 5 * n_peaks or x.shape != y.shape:
        raise ValueError("trace too short for the requested number of lines")
    scale = float(np.median(np.abs(y))) or float(np.max(np.abs(y))) or 1.0
    x0, xspan = float(x.mean()), float(np.ptp(x))
    u = (x - x0) / xspan
    v = y / scale
    step = float(np.min(np.diff(u)))

    dips = extract_dips(u, v, prominence=0.02 * float(np.ptp(v)))
    if len(dips):
        depth_at = np.interp(dips, u, v)
        dips = dips[np.argsort(depth_at)]
    guesses = list(dips[:n_peaks])
    while len(guesses) < n_peaks:
        guesses.append(u[int(np.argmin(v))] + 0.05 * len(guesses))
    base0 = float(np.max(v))
    centers0 = np.array(guesses)
    depth0 = np.maximum(base0 - np.interp(centers0, u, v), 1e-3)
    width0 = np.full(n_peaks, max(0.02, 4 * step))

    def unpack(p):
        return p[0], p[1::3], p[2::3], p[3::3]

    def resid(p):
        b, c, w, d = unpack(p)
        return _dip_model(u, b, c, w, d) - v

    lo = [-np.inf] + [-1.0, step / 4, 0.0] * n_peaks
    hi = [np.inf] + [1.0, 2.0, np.inf] * n_peaks
    rng = np.random.default_rng(seed)
    best = None
    for k in range(n_starts):
        c = centers0 + (0 if k == 0 else rng.normal(0, 1, n_peaks) * width0[0])
        w = width0 * (1 if k == 0 else np.exp(rng.normal(0, 0.5, n_peaks)))
        p0 = [base0]
        for ci, wi, di in zip(np.clip(c, -0.5, 0.5), w, depth0):
            p0 += [ci, wi, di]
        try:
            r = least_squares(resid, p0, bounds=(lo, hi), x_scale="jac", xtol=1e-12,
                              ftol=1e-12, max_nfev=4000)
        except ValueError as exc:
            log.debug("start %d failed: %s", k, exc)
            continue
        if best is None or r.cost < best.cost:
            best = r
    if best is None or not np.all(np.isfinite(best.x)):
        raise FitError("Lorentzian fit failed from every start",
                       None if best is None else math.sqrt(2 * best.cost / len(u)) * scale)
    b, c, w, d = unpack(best.x)
    order = np.argsort(c)
    centers = x0 + c[order] * xspan
    widths = w[order] * xspan
    depths = d[order] * scale
    rms = math.sqrt(np.mean(resid(best.x) ** 2)) * scale
    ill = n_peaks == 2 and abs(centers[1] - centers[0]) < 0.5 * float(np.max(widths))
    return LorentzianFit(centers, widths, depths, b * scale, rms, bool(ill))


# ------------------------------------------------------------- device fits

@dataclass(frozen=True)
class Observation:
    phi_sq: float
    frequency: float             # GHz
    weight: float = 1.0
    branch: int = 0              # rank among the single-excitation transitions at this bias


@dataclass
class FitProblem:
    observed: list[Observation]
    free_params: dict[str, tuple[float, float]]     # "section_field" -> bounds
    fixed: dev.DeviceParams = field(default_factory=dev.DeviceParams)
    phi_tr: float = 0.162
    layout: SpaceLayout = field(
        default_factory=lambda: canonical_layout(include=(TRANSMON, SQUID, R50)))
    # far-detuned DQD; only used when the layout contains it
    dqd: dev.DqdParams = field(default_factory=lambda: dev.DqdParams(t_c=2.0, delta=10.0))

    def __post_init__(self):
        for name, (lo, hi) in self.free_params.items():
            self.fixed.get(name)    # raises for unknown names
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name} must be finite and ordered")

    @property
    def n_branches(self) -> int:
        return 1 + max(o.branch for o in self.observed)


@dataclass
class FitResult:
    params: dev.DeviceParams
    values: dict[str, float]
    residuals: np.ndarray        # model - observed per observation, GHz
    rms: float
    simplex_spread: float        # spread of RMS residual over the final simplex, GHz
    history: list[float]         # best objective per iteration
    n_evaluations: int
    converged: bool


def model_frequencies(params: dev.DeviceParams, phi_sq_values, n_branches: int,
                      phi_tr: float = 0.162, layout: SpaceLayout | None = None,
                      dqd: dev.DqdParams | None = None) -> np.ndarray:
    """Single-excitation transitions (GHz) versus array flux, shape (n_bias, n_branches)."""
    layout = layout or canonical_layout(include=(TRANSMON, SQUID, R50))
    dqd = dqd or dev.DqdParams(t_c=2.0, delta=10.0)
    out = np.empty((len(phi_sq_values), n_branches))
    for i, phi in enumerate(phi_sq_values):
        H = assemble(params, dev.FluxBias(phi, phi_tr), dqd, layout)
        out[i] = single_excitation_transitions(H, n_branches)
    return out


def synthetic_observations(params: dev.DeviceParams, phi_sq_values, n_branches: int = 3,
                           phi_tr: float = 0.162) -> list[Observation]:
    f = model_frequencies(params, phi_sq_values, n_branches, phi_tr)
    return [Observation(float(phi), float(f[i, k]), 1.0, k)
            for i, phi in enumerate(phi_sq_values) for k in range(n_branches)]


def fit_device(problem: FitProblem, start: dict[str, float] | None = None,
               spread_tol: float = 1e-5, max_iter: int = 2000, max_restarts: int = 6
               ) -> FitResult:
    """Nelder-Mead fit of the free device parameters to observed transitions.

    Coordinates are scaled by the start values so the initial simplex is a
    uniform relative perturbation. The search is restarted from the best
    vertex until the RMS residual stops improving.
    """
    names = list(problem.free_params)
    obs = problem.observed
    if len(obs) < 2 * len(names):
        raise ValueError(f"{len(obs)} observations for {len(names)} free parameters; "
                         f"need at least {2 * len(names)}")
    start = dict(start or {n: problem.fixed.get(n) for n in names})
    x_scale = np.array([start[n] if start[n] != 0 else 1.0 for n in names])
    bounds = np.array([problem.free_params[n] for n in names]) / x_scale[:, None]
    bounds.sort(axis=1)

    weights = np.array([o.weight for o in obs])
    active = weights != 0
    biases = sorted({o.phi_sq for o, a in zip(obs, active) if a})
    row = {phi: i for i, phi in enumerate(biases)}
    f_obs = np.array([o.frequency for o in obs])
    n_br = problem.n_branches
    cache: dict[tuple, float] = {}

    def params_of(x):
        return problem.fixed.with_values(**dict(zip(names, x * x_scale)))

    def residuals(x):
        f = model_frequencies(params_of(x), biases, n_br, problem.phi_tr, problem.layout,
                              problem.dqd)
        r = np.zeros(len(obs))
        for k, o in enumerate(obs):
            if active[k]:
                r[k] = f[row[o.phi_sq], o.branch] - o.frequency
        return r

    def cost(x):
        key = tuple(np.round(x, 15))
        if key not in cache:
            if np.any(x < bounds[:, 0]) or np.any(x > bounds[:, 1]):
                cache[key] = math.inf
            else:
                try:
                    r = residuals(x)
                    cache[key] = float(np.sum(weights * r ** 2) / np.sum(weights))
                except Exception as exc:  # noqa: BLE001 - non-physical vertex
                    log.debug("model failed at %s: %s", x, exc)
                    cache[key] = math.inf
        return cache[key]

    history: list[float] = []
    x = np.ones(len(names))
    best = cost(x)
    history.append(best)
    spread = math.inf
    for restart in range(max_restarts):
        res = minimize(cost, x, method="Nelder-Mead",
                       callback=lambda xk: history.append(min(history[-1], cost(xk))),
                       options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-13,
                                "adaptive": False, "initial_simplex": _simplex(x, 0.05 / 2 ** restart)})
        vertices = res.final_simplex[1]
        spread = float(np.ptp(np.sqrt(vertices)))
        improved = math.sqrt(best) - math.sqrt(res.fun) > 0.1 * spread_tol
        if res.fun <= best:
            x, best = res.x, res.fun
        log.info("restart %d: rms %.3g GHz, spread %.3g GHz", restart, math.sqrt(best), spread)
        if not improved and spread < spread_tol:
            break
    r = residuals(x)
    result = FitResult(params_of(x), dict(zip(names, x * x_scale)), r,
                       math.sqrt(max(best, 0.0)), spread, history, len(cache),
                       spread < spread_tol)
    if not result.converged:
        raise FitError(f"simplex spread {spread:.3g} GHz above tolerance {spread_tol:.3g}",
                       result)
    return result


def _simplex(x, rel):
    pts = [x.copy()]
    for i in range(len(x)):
        p = x.copy()
        p[i] *= 1 + rel
        pts.append(p)
    return np.array(pts)
