"""Command-line entry point: ``froglab {synth,recon,verify,ambiguity,nullspace}``.

Exit codes: 0 success, 1 internal error, 2 validation error. All output
files are reproducible byte for byte given the same flags; wall-clock
timings are added to reports only with ``--timings``.
"""

from __future__ import annotations

import argparse
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import fileio
from ._parallel import parallel_map
from .ambiguity import check_trace_invariance
from .core import Kind, TraceGeometry, random_bandlimited_pulse, random_pulse
from .forward import NoiseModel, NoiseSpec, add_noise, power_spectrum, synthesize_trace
from .recon import ReconOptions, pcgp_reconstruct, ptycho_reconstruct, trace_error
from .uniqueness import (SUPPORT_THRESHOLD, GsOptions, analyze_nullspace, build_decomposition,
                         build_phase_system, check_bandlimit, verify_uniqueness)


class UsageError(Exception):
    """Invalid user input; maps to exit code 2."""


def _out(prefix, suffix: str) -> Path:
    p = Path(prefix)
    if p.parent and not p.parent.exists():
        raise UsageError(f"output directory {p.parent} does not exist")
    return p.with_name(p.name + suffix)


def _options(args) -> dict:
    skip = {"func", "timings"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _finish(args, path, command, inputs, metrics, t0):
    timings = {"wall_seconds": time.perf_counter() - t0} if args.timings else None
    doc = fileio.run_report(command, inputs, _options(args), metrics, args.seed, timings)
    fileio.write_json(path, doc)


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def _load_pair(args, need_second: bool, forbid_second: bool):
    """Signals from --signal/--signal2, or ``None`` when --random is used."""
    if forbid_second and getattr(args, "signal2", None):
        raise UsageError("this kind uses a single pulse; drop --signal2")
    if getattr(args, "random", False):
        if args.signal is not None or getattr(args, "signal2", None):
            raise UsageError("--random excludes --signal and --signal2")
        if args.n is None:
            raise UsageError("--random needs --n")
        return None
    if args.signal is None:
        if hasattr(args, "random"):
            raise UsageError("give --signal or --random with --n")
        return None
    x1 = fileio.read_signal(args.signal)
    x2 = None
    if getattr(args, "signal2", None):
        x2 = fileio.read_signal(args.signal2)
        if x2.size != x1.size:
            raise UsageError("--signal and --signal2 differ in length")
    elif need_second:
        raise UsageError("this kind needs --signal2")
    return x1, x2


def _draw(n: int, rng, bandlimit: bool, zero_run_start, profile: str, second: bool):
    if bandlimit:
        x1 = random_bandlimited_pulse(n, rng, zero_run_start, profile)
    else:
        x1 = random_pulse(n, rng)
    return x1, (random_pulse(n, rng) if second else None)


def _clamped_spectrum(x) -> np.ndarray:
    ps = power_spectrum(x)
    return np.where(ps <= SUPPORT_THRESHOLD * ps.max(), 0.0, ps)


# -- synth ---------------------------------------------------------------------

def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    kind = Kind(args.kind)
    two = kind in (Kind.BLIND_SHG, Kind.CRAB)
    pair = _load_pair(args, need_second=two, forbid_second=kind.single_pulse)
    if pair is None:
        rng = np.random.default_rng(args.seed)
        pair = _draw(args.n, rng, args.bandlimit, args.zero_run_start, args.profile, two)
    x1, x2 = pair
    g = TraceGeometry(x1.size, args.l, kind, args.delay_sign)
    clean = synthesize_trace(x1, x2, g)
    noise = NoiseSpec(NoiseModel(args.noise_model), args.noise_level, args.seed)
    trace = add_noise(clean, noise)

    prov = {"seed": args.seed, "noise": {"model": noise.model.value, "level": noise.level}}
    trace_csv, _ = fileio.write_trace(_out(args.out_prefix, "_trace"), trace, prov)
    ps1 = _clamped_spectrum(x1)
    cols = {"k": range(x1.size), "ps1": ps1}
    if x2 is not None:
        cols["ps2"] = _clamped_spectrum(x2)
    fileio.write_columns_csv(_out(args.out_prefix, "_spectrum.csv"), cols)
    fileio.write_signal(_out(args.out_prefix, "_x1.json"), x1, "x1")
    if x2 is not None:
        fileio.write_signal(_out(args.out_prefix, "_x2.json"), x2, "x2")

    band = check_bandlimit(np.fft.fft(x1))
    metrics = {"n": g.n, "m_count": g.m_count, "trace_peak": float(trace.values.max()),
               "trace_error_vs_clean": trace_error(trace, clean)[0] if clean.values.any() else 0.0,
               "bandlimit_satisfied": band.satisfied, "zero_run_length": band.zero_run_length,
               "zero_run_start": band.zero_run_start}
    inputs = {"signal": args.signal, "signal2": args.signal2}
    _finish(args, _out(args.out_prefix, "_report.json"), "synth", inputs, metrics, t0)
    print(f"wrote {trace_csv} ({g.n} x {g.m_count}, kind {kind.value}, L={g.l})")
    return 0


# -- recon ---------------------------------------------------------------------

def cmd_recon(args) -> int:
    t0 = time.perf_counter()
    trace = fileio.read_trace(args.trace)
    g = trace.geometry
    if g.kind not in (Kind.SHG, Kind.BLIND_SHG):
        raise UsageError(f"reconstruction supports shg and blind-shg traces, got {g.kind.value}")
    if args.algo == "pcgp" and g.l != 1:
        raise UsageError(f"pcgp requires L=1 (trace has L={g.l}); use --algo ptycho")
    shg = g.kind is Kind.SHG
    truth = None
    if args.truth:
        r1 = fileio.read_signal(args.truth)
        r2 = fileio.read_signal(args.truth2) if args.truth2 else None
        if r1.size != g.n or (r2 is not None and r2.size != g.n):
            raise UsageError("truth length does not match the trace")
        if not shg and r2 is None:
            raise UsageError("blind traces need --truth2 as well")
        truth = (r1, r2)
    opts = ReconOptions(max_iter=args.max_iter, tol=args.tol, restarts=args.restarts,
                        seed=args.seed, beta=args.beta, rank1=args.rank1)
    algo = pcgp_reconstruct if args.algo == "pcgp" else ptycho_reconstruct
    rep = algo(trace, opts, shg_mode=shg, truth=truth)

    fileio.write_signal(_out(args.out_prefix, "_est1.json"), rep.x1, "estimate x1")
    if not shg:
        fileio.write_signal(_out(args.out_prefix, "_est2.json"), rep.x2, "estimate x2")
    fileio.write_columns_csv(_out(args.out_prefix, "_trajectory.csv"),
                             {"iteration": range(rep.trajectory.size), "G": rep.trajectory})
    est = synthesize_trace(rep.x1, None if shg else rep.x2, g)
    fileio.write_trace(_out(args.out_prefix, "_recon"), est,
                       {"seed": args.seed, "source": args.trace})
    metrics = {"G": rep.trace_error, "iterations": rep.iterations, "converged": rep.converged,
               "best_restart": rep.restart, "restart_errors": rep.restart_errors}
    if rep.aligned_residual is not None:
        metrics["aligned_residual"] = rep.aligned_residual
    inputs = {"trace": args.trace, "truth": args.truth, "truth2": args.truth2}
    _finish(args, _out(args.out_prefix, "_report.json"), "recon", inputs, metrics, t0)
    line = f"{args.algo}: G={rep.trace_error:.3e} after {rep.iterations} iterations"
    if rep.aligned_residual is not None:
        line += f", aligned residual {rep.aligned_residual:.3e}"
    print(line)
    return 0


# -- verify --------------------------------------------------------------------

def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    pair = _load_pair(args, need_second=False, forbid_second=args.shg)
    shg = args.shg or (pair is not None and pair[1] is None)
    opts = GsOptions(max_iter=args.max_iter, restarts=args.restarts)
    if args.strict:
        # validate up front so the error is a usage error, not a worker crash
        if pair is not None and not check_bandlimit(np.fft.fft(pair[0])).satisfied:
            raise UsageError("--strict: x1 violates the bandlimit hypothesis")
        if pair is None and args.no_bandlimit:
            raise UsageError("--strict: --no-bandlimit draws violate the hypothesis")

    def run(trial):
        ts = _trial_seed(args.seed, trial)
        if pair is None:
            rng = np.random.default_rng([args.seed, trial])
            x1, x2 = _draw(args.n, rng, not args.no_bandlimit, args.zero_run_start,
                           args.profile, not shg)
        else:
            x1, x2 = pair
        return verify_uniqueness(x1, x2, args.mode, opts, seed=ts, strict=args.strict)

    reports = parallel_map(run, range(args.trials), args.workers)

    resid_rows = {"trial": [], "passed": [], "aligned_residual": [], "system_residual": [],
                  "nullspace_dim": [], "bandlimit_satisfied": [], "failed_rows": []}
    row_table = {"trial": [], "k": [], "residual": [], "converged": []}
    for i, r in enumerate(reports):
        resid_rows["trial"].append(i)
        resid_rows["passed"].append(int(r.passed))
        resid_rows["aligned_residual"].append(r.aligned_residual)
        resid_rows["system_residual"].append(r.system_residual)
        resid_rows["nullspace_dim"].append(r.nullspace.dimension)
        resid_rows["bandlimit_satisfied"].append(int(r.bandlimit.satisfied))
        resid_rows["failed_rows"].append(len(r.failed_rows))
        for k in range(r.n):
            row_table["trial"].append(i)
            row_table["k"].append(k)
            row_table["residual"].append(r.row_residuals[k])
            row_table["converged"].append(int(r.row_converged[k]))
    fileio.write_columns_csv(_out(args.out_prefix, "_residuals.csv"), resid_rows)
    fileio.write_columns_csv(_out(args.out_prefix, "_rows.csv"), row_table)

    hist = Counter(r.nullspace.dimension for r in reports)
    fileio.write_columns_csv(_out(args.out_prefix, "_nullspace_hist.csv"),
                             {"dimension": sorted(hist), "count": [hist[d] for d in sorted(hist)]})
    res = np.array([r.aligned_residual for r in reports])
    failed = [r for r in reports if not r.passed]
    passes = len(reports) - len(failed)
    metrics = {
        "trials": len(reports), "passes": passes, "pass_rate": passes / len(reports),
        "nullspace_dimension_histogram": {str(d): hist[d] for d in sorted(hist)},
        "aligned_residual": {"min": res.min(), "median": float(np.median(res)), "max": res.max()},
        "hypothesis_violations": sum(r.hypothesis_violated for r in reports),
        "failures_with_unconverged_rows": sum(bool(r.failed_rows) for r in failed),
        "row_residual_max": max(float(r.row_residuals.max()) for r in reports),
        "shg": shg, "mode": args.mode,
    }
    inputs = {"signal": args.signal, "signal2": args.signal2}
    _finish(args, _out(args.out_prefix, "_report.json"), "verify", inputs, metrics, t0)
    print(f"{args.mode}: {passes}/{len(reports)} trials passed "
          f"(pass rate {passes / len(reports):.3f}), null-space dimensions "
          + ", ".join(f"{d}: {hist[d]}" for d in sorted(hist)))
    if args.mode == "gs" and len(reports) == 1:
        r = reports[0]
        print("k  residual   converged")
        for k in range(r.n):
            print(f"{k:<2} {r.row_residuals[k]:.3e}  {bool(r.row_converged[k])}")
    return 0


# -- ambiguity -------------------------------------------------------------------

def cmd_ambiguity(args) -> int:
    t0 = time.perf_counter()
    kind = Kind(args.kind)
    two = kind in (Kind.BLIND_SHG, Kind.CRAB)
    pair = _load_pair(args, need_second=two, forbid_second=kind.single_pulse)
    if pair is None:
        pair = _draw(args.n, np.random.default_rng(args.seed), False, None, "iid", two)
    x1, x2 = pair
    g = TraceGeometry(x1.size, args.l, kind)
    rep = check_trace_invariance(x1, x2, g, seed=args.seed, tolerance=args.tolerance,
                                 corrupt=args.corrupt)
    for c in rep.checks:
        if c.status in ("PASS", "FAIL"):
            print(f"{c.name}: {c.status} (max relative deviation {c.max_deviation:.3e})")
        else:
            print(f"{c.name}: {c.status}")
    if args.out_prefix:
        checks = [{"name": c.name, "status": c.status,
                   "max_deviation": c.max_deviation if c.status in ("PASS", "FAIL") else None}
                  for c in rep.checks]
        metrics = {"checks": checks, "passed": rep.passed, "tolerance": rep.tolerance}
        inputs = {"signal": args.signal, "signal2": args.signal2}
        _finish(args, _out(args.out_prefix, "_report.json"), "ambiguity", inputs, metrics, t0)
    return 0 if rep.passed else 1


# -- nullspace -------------------------------------------------------------------

def cmd_nullspace(args) -> int:
    t0 = time.perf_counter()
    if args.support == "from-signal":
        pair = _load_pair(args, need_second=False, forbid_second=False)
        if pair is None:
            raise UsageError("--support from-signal needs --signal")
        n = pair[0].size
    else:
        if args.n is None:
            raise UsageError("--n is required unless --support from-signal")
        if args.n < 2:
            raise UsageError("--n must be at least 2")
        pair, n = None, args.n

    def run(trial):
        if pair is not None:
            x1, x2 = pair
            x2 = x1 if x2 is None else x2
        else:
            rng = np.random.default_rng([args.seed, trial])
            x1, x2 = _draw(n, rng, args.support == "bandlimit", args.zero_run_start, "iid", True)
            if args.tied:
                x2 = x1
        decomp = build_decomposition(power_spectrum(x1), power_spectrum(x2))
        system = build_phase_system(decomp, np.zeros((n, n)), tied=args.tied)
        return analyze_nullspace(system)

    reps = parallel_map(run, range(args.trials), args.workers)
    hist = Counter(r.dimension for r in reps)
    shapes = sorted({tuple(r.shape) for r in reps})
    for i, r in enumerate(reps):
        print(f"trial {i}: shape {r.shape[0]}x{r.shape[1]}, null-space dimension "
              f"{r.dimension}, constants contained: {r.contains_constants}")
    metrics = {
        "n": n, "support": args.support, "tied": args.tied, "trials": len(reps),
        "dimensions": [r.dimension for r in reps],
        "dimension_histogram": {str(d): hist[d] for d in sorted(hist)},
        "modal_dimension": max(sorted(hist), key=lambda d: hist[d]),
        "contains_constants": [r.contains_constants for r in reps],
        "system_shapes": [list(s) for s in shapes],
    }
    if args.out_prefix:
        dims = sorted(hist)
        fileio.write_columns_csv(_out(args.out_prefix, "_hist.csv"),
                                 {"dimension": dims, "count": [hist[d] for d in dims]})
        inputs = {"signal": args.signal, "signal2": args.signal2}
        _finish(args, _out(args.out_prefix, "_report.json"), "nullspace", inputs, metrics, t0)
    return 0


# -- parser ----------------------------------------------------------------------

def _common(p, out_required=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=out_required, default=None,
                   help="path prefix for all output files")
    p.add_argument("--timings", action="store_true",
                   help="add wall-clock timings to the report (breaks byte reproducibility)")


def _signals(p):
    p.add_argument("--signal", help="signal JSON for x1")
    p.add_argument("--signal2", help="signal JSON for x2")
    p.add_argument("--random", action="store_true", help="draw random signals instead")
    p.add_argument("--n", type=int, help="length of random signals")
    p.add_argument("--zero-run-start", type=int, default=None)
    p.add_argument("--profile", choices=["iid", "smooth"], default="iid")


def _workers(p):
    p.add_argument("--workers", type=int, default=0,
                   help="worker threads (0 = auto; capped by FROGLAB_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="froglab", description="FROG trace synthesis, uniqueness checks and pulse "
                                     "reconstruction",
                                     epilog="exit codes: 0 success, 1 internal error or failed "
                                     "check, 2 invalid input")
    sub = parser.add_subparsers(dest="command", required=True)
    kinds = [k.value for k in Kind]

    p = sub.add_parser("synth", help="synthesize a (noisy) FROG trace")
    _signals(p)
    p.add_argument("--bandlimit", action="store_true",
                   help="random x1 with a zero spectral run of length ceil((N-1)/2)")
    p.add_argument("--kind", choices=kinds, default=Kind.BLIND_SHG.value)
    p.add_argument("--l", type=int, default=1, help="delay stride L")
    p.add_argument("--delay-sign", type=int, choices=[1, -1], default=None)
    p.add_argument("--noise-model", choices=[m.value for m in NoiseModel], default="none")
    p.add_argument("--noise-level", type=float, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("recon", help="reconstruct pulses from a trace")
    p.add_argument("--trace", required=True, help="trace CSV (sidecar JSON alongside)")
    p.add_argument("--algo", choices=["pcgp", "ptycho"], default="pcgp")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--rank1", choices=["power", "svd"], default="power")
    p.add_argument("--truth", help="true x1 for the aligned residual")
    p.add_argument("--truth2", help="true x2 (blind traces)")
    _common(p)
    p.set_defaults(func=cmd_recon)

    p = sub.add_parser("verify", help="run the uniqueness pipeline on known pulses")
    _signals(p)
    p.add_argument("--shg", action="store_true", help="single-pulse SHG (x2 = x1)")
    p.add_argument("--no-bandlimit", action="store_true",
                   help="random x1 without the spectral zero run")
    p.add_argument("--mode", choices=["oracle", "gs"], default="oracle")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--restarts", type=int, default=32, help="GS restarts per row")
    p.add_argument("--max-iter", type=int, default=3000, help="GS iterations per row")
    p.add_argument("--strict", action="store_true",
                   help="treat a bandlimit violation as an error")
    _workers(p)
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ambiguity", help="check trace invariance under trivial ambiguities")
    _signals(p)
    p.add_argument("--kind", choices=kinds, default=Kind.BLIND_SHG.value)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    _common(p, out_required=False)
    p.set_defaults(func=cmd_ambiguity)

    p = sub.add_parser("nullspace", help="null-space dimension of the phase system")
    p.add_argument("--n", type=int)
    p.add_argument("--support", choices=["full", "bandlimit", "from-signal"], default="full")
    p.add_argument("--signal")
    p.add_argument("--signal2")
    p.add_argument("--zero-run-start", type=int, default=None)
    p.add_argument("--tied", action="store_true", help="single-pulse system (phi2 = phi1)")
    p.add_argument("--trials", type=int, default=1)
    _workers(p)
    _common(p, out_required=False)
    p.set_defaults(func=cmd_nullspace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        parser.error("--trials must be at least 1")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError, KeyError) as exc:
        print(f"froglab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 1
        print(f"froglab {args.command}: internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
