"""Command-line front end.

    hybridqed <spectrum|rabi|s11|chevron|fit> --config FILE_OR_PRESET [--out DIR]
              [--threads N] [--verbose]

Each run writes ``<experiment>.csv`` and ``<experiment>.json`` into the output
directory. Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import device as dev
from .config import EXPERIMENTS, ConfigError, RunConfig, load, preset_names, sweep_values
from .operators import R50, SQUID, canonical_layout
from .records import read_observations, write_csv, write_json

log = logging.getLogger("hybridqed")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# ------------------------------------------------------------------ models

def _layout(cfg: RunConfig):
    t = cfg["truncation"]
    return canonical_layout(t.n_tr, t.n_sq, t.n_50, include=cfg.layout_include())


def _operating_point(cfg: RunConfig):
    from .hamiltonian import OperatingPoint

    p = cfg["point"]
    return OperatingPoint(p.two_t_c, p.omega_tr, p.omega_sq, p.g_tr_sq, p.g_dqd_sq, p.g_tr_50,
                          p.omega_50, cfg["transmon"])


def _hamiltonian_at(cfg: RunConfig, layout, axis: str | None = None, value: float = 0.0):
    """System Hamiltonian at the configured bias, optionally overriding one axis."""
    from .hamiltonian import assemble

    dqd, bias = cfg["dqd"], cfg["bias"]
    if cfg["run"].model == "point":
        delta = value if axis == "delta" else dqd.delta
        dphi = value if axis == "dphi_tr" else 0.0
        return _operating_point(cfg).hamiltonian(delta, dphi, layout)
    if axis == "phi_sq":
        bias = dev.FluxBias(value, bias.phi_tr)
    elif axis == "phi_tr":
        bias = dev.FluxBias(bias.phi_sq, value)
    elif axis == "delta":
        dqd = dev.DqdParams(dqd.t_c, value, dqd.gamma2)
    return assemble(cfg.device(), bias, dqd, layout)


def _metadata(cfg: RunConfig, **extra) -> dict:
    return {"version": __version__, "experiment": cfg.experiment,
            "units": {"frequency": "GHz", "time": "ns", "flux": "phi0"},
            "config": cfg.resolved(), **extra}


# ---------------------------------------------------------------- commands

def cmd_spectrum(cfg: RunConfig, out: Path, threads: int = 1, verbose: bool = False) -> int:
    from .spectra import CrossingNotFound, find_avoided_crossing, sweep_spectrum

    sw = cfg["sweep"]
    axis, start, stop = sweep_values(cfg)
    layout = _layout(cfg)
    values = np.linspace(start, stop, sw.points)
    res = sweep_spectrum(lambda x: _hamiltonian_at(cfg, layout, axis, x), axis, values,
                         sw.n_transitions, threads=threads, track=sw.track)
    write_csv(out / "spectrum.csv", res.header(), res.rows())
    meta = _metadata(cfg, failed_points={str(values[i]): e for i, e in res.errors.items()})
    status = EXIT_OK
    if len(res.errors) == len(values):
        status = EXIT_NUMERIC
        log.error("every sweep point failed; first error: %s", next(iter(res.errors.values())))
    elif sw.crossing:
        pair = tuple(int(x) for x in sw.crossing)
        try:
            c = find_avoided_crossing(res, pair)
            meta["crossing"] = {"branches": list(pair), "location": c.location,
                                "gap_ghz": c.gap, "gap_mhz": c.gap_mhz}
            log.info("avoided crossing %s at %s = %.6g: gap %.4f MHz", pair, axis, c.location,
                     c.gap_mhz)
        except CrossingNotFound as exc:
            meta["crossing"] = {"branches": list(pair), "error": str(exc)}
            log.error("%s", exc)
            status = EXIT_NUMERIC
    write_json(out / "spectrum.json", meta)
    return status


def _reflection_spec(cfg: RunConfig, which: str):
    from .spectra import ReflectionSpec, probe_grid

    p, r = cfg["probe"], cfg["reflection"]
    grid = probe_grid(p.center, p.span, p.points)
    if which == "squid":
        return ReflectionSpec(grid, r.kappa_ext, r.kappa_int, r.multiplex_phase)
    return ReflectionSpec(grid, r.kappa_ext_50, r.kappa_int_50, r.multiplex_phase)


def cmd_rabi(cfg: RunConfig, out: Path, threads: int = 1, verbose: bool = False) -> int:
    from .spectra import vacuum_rabi_trace

    which = cfg["reflection"].resonator
    H = _hamiltonian_at(cfg, _layout(cfg))
    rs = vacuum_rabi_trace(H, _reflection_spec(cfg, which), SQUID if which == "squid" else R50)
    s, fit = rs.trace.s11, rs.fit
    write_csv(out / "rabi.csv", ["probe", "s11_re", "s11_im", "s11_abs", "fit_abs"],
              zip(rs.trace.probe, s.real, s.imag, np.abs(s), fit.model(rs.trace.probe)))
    write_json(out / "rabi.json", _metadata(
        cfg, bare_point=H.point.summary(),
        result={"splitting_ghz": rs.splitting, "splitting_mhz": 1e3 * rs.splitting,
                "linewidth_ghz": rs.linewidth, "resolved": rs.resolved,
                "centers_ghz": fit.centers, "widths_ghz": fit.widths, "depths": fit.depths,
                "baseline": fit.baseline, "fit_residual": fit.residual,
                "ill_conditioned": fit.ill_conditioned}))
    log.info("vacuum Rabi splitting %.3f MHz", 1e3 * rs.splitting)
    return EXIT_OK


def cmd_s11(cfg: RunConfig, out: Path, threads: int = 1, verbose: bool = False) -> int:
    from .spectra import multiplexed_response, s11_of

    H = _hamiltonian_at(cfg, _layout(cfg))
    t_sq = s11_of(H, _reflection_spec(cfg, "squid"), SQUID)
    t_50 = s11_of(H, _reflection_spec(cfg, "r50"), R50)
    mux = multiplexed_response(t_sq, t_50, cfg["reflection"].multiplex_phase)
    a, b = t_sq.s11, t_50.s11
    write_csv(out / "s11.csv",
              ["probe", "s11_sq_re", "s11_sq_im", "s11_sq_abs", "s11_50_re", "s11_50_im",
               "s11_50_abs", "multiplexed_abs"],
              zip(t_sq.probe, a.real, a.imag, np.abs(a), b.real, b.imag, np.abs(b), mux))
    write_json(out / "s11.json", _metadata(cfg, bare_point=H.point.summary()))
    return EXIT_OK


def cmd_chevron(cfg: RunConfig, out: Path, threads: int = 1, verbose: bool = False) -> int:
    from .dynamics import LinearAmplitudeMap, PairRates, run_chevron

    c = cfg["chevron"]
    amps = np.linspace(c.amplitude_start, c.amplitude_stop, c.amplitude_points)
    taus = np.linspace(c.plateau_start, c.plateau_stop, c.plateau_points)
    amap = LinearAmplitudeMap(c.resonant_amplitude, c.omega_dqd, c.slope)
    res = run_chevron(PairRates(c.two_j, c.t1, c.t2star, c.gamma2), amps, taus,
                      c.filter_sigma, c.prep_offset, amap, c.omega_dqd, c.max_step, threads)
    write_csv(out / "chevron.csv", res.header(), res.rows())
    if verbose:
        write_csv(out / "chevron_cells.csv", ["amplitude", "plateau", "population"],
                  ((a, t, res.population[i, j]) for i, a in enumerate(amps)
                   for j, t in enumerate(taus)))
    write_json(out / "chevron.json", _metadata(cfg, integrator=res.metadata))
    return EXIT_OK


def cmd_fit(cfg: RunConfig, out: Path, threads: int = 1, verbose: bool = False) -> int:
    from .estimate import FitError, FitProblem, fit_device, synthetic_observations

    f = cfg["fit"]
    reference = cfg.device()
    phi_tr = cfg["bias"].phi_tr
    synthetic = f.observations.strip().lower() == "synthetic"
    if synthetic:
        phis = np.linspace(f.phi_start, f.phi_stop, f.points)
        observed = synthetic_observations(reference, phis, f.n_branches, phi_tr)
    else:
        path = Path(f.observations)
        if not path.is_absolute() and cfg.source:
            path = Path(cfg.source).parent / path
        try:
            observed = read_observations(path)
        except (OSError, ValueError) as exc:
            raise cfg.error(str(exc), "fit", "observations") from None
    ref = {n: reference.get(n) for n in f.free}
    bounds = {n: tuple(sorted((v * (1 - f.bound_rel), v * (1 + f.bound_rel))))
              for n, v in ref.items()}
    start = {n: v * (1 + (f.start_offset if k % 2 == 0 else -f.start_offset))
             for k, (n, v) in enumerate(ref.items())}
    problem = FitProblem(observed, bounds, reference, phi_tr, _layout(cfg), cfg["dqd"])
    status = EXIT_OK
    try:
        result = fit_device(problem, start, f.spread_tol, f.max_iter)
    except FitError as exc:
        log.error("%s", exc)
        result, status = exc.best, EXIT_NUMERIC
        if result is None:
            return status
    rel = {n: (result.values[n] - ref[n]) / ref[n] for n in f.free}
    write_csv(out / "fit.csv", ["parameter", "reference", "start", "fitted", "relative_error"],
              ([n, ref[n], start[n], result.values[n], rel[n]] for n in f.free))
    write_json(out / "fit.json", _metadata(
        cfg, observations="synthetic" if synthetic else str(f.observations),
        n_observations=len(observed),
        result={"values": result.values, "start": start, "bounds": bounds,
                "relative_error": rel, "rms_ghz": result.rms,
                "simplex_spread_ghz": result.simplex_spread, "converged": result.converged,
                "n_evaluations": result.n_evaluations, "n_iterations": len(result.history) - 1}))
    for n in f.free:
        log.info("%-22s %.9g  (reference %.9g, rel %+.2e)", n, result.values[n], ref[n], rel[n])
    return status


COMMANDS = {"spectrum": cmd_spectrum, "rabi": cmd_rabi, "s11": cmd_s11,
            "chevron": cmd_chevron, "fit": cmd_fit}


# ------------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridqed",
        description="Spectra, reflection, chevron dynamics and fits for a transmon and a "
                    "DQD charge qubit coupled through a SQUID-array resonator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True,
                       help="config file, or the name of a bundled preset")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--threads", type=int, default=1, help="worker thread cap")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub.add_parser("presets", help="list bundled presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
                        force=True)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load(args.config, args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        status = COMMANDS[args.command](cfg, out, args.threads, args.verbose)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
