"""Command-line surface: simulate, estimate, varfn, vst, bench.

File conventions: one decimal value per line, '.' decimal separator, LF
endings, '#' comment lines. Exit codes: 0 success, 2 usage error, 3 data
error. ``FISZKIT_THREADS`` caps how many worker processes the benchmark
may use; results are independent of that setting.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimator import EstimatorConfig, baseline_mad_estimate, estimate
from .signals import (GAUSSIAN, SIGNAL_GENERATORS, NoiseModel, SeedSpec,
                      sample_noise)
from .varfn import VarFnConfig, VarianceEstimate, estimate_variance_function
from .vst import divisors_as_lines, divisors_from_lines, forward_vst, inverse_vst
from .wavelet import basis_by_name

__all__ = ["main", "read_series", "write_series", "run_bench", "BenchReport"]

BENCH_RANGES = {"blocks": (1.0, 22.6), "bumps": (3.0, 23.21)}
BENCH_CELLS = (("blocks", "exponential"), ("blocks", "poisson"),
               ("bumps", "exponential"), ("bumps", "poisson"))
BENCH_METHODS = ("mad-baseline", "wavefisz")


# ----------------------------------------------------------------- file I/O

def read_series(path) -> np.ndarray:
    """Read a one-value-per-line series; parse errors carry line numbers."""
    values = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            try:
                values.append(float(s))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {s!r} as a number") from None
    if not values:
        raise ValueError(f"{path}: no data lines")
    return np.asarray(values)


def write_series(path, values, header=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in header:
            f.write(f"# {line}\n")
        for v in np.asarray(values, dtype=float):
            f.write(f"{v:.17g}\n")


def write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def _sidecar(out_path, tag: str) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.stem + "_" + tag + out_path.suffix)


# ------------------------------------------------------------ flag parsing

def _dyadic(text: str) -> int:
    n = int(text)
    if n < 2 or n & (n - 1):
        raise argparse.ArgumentTypeError(f"length must be a power of two >= 2, got {n}")
    return n


def _bandwidth(text: str):
    if text == "auto":
        return "auto"
    b = float(text)
    if b <= 0:
        raise argparse.ArgumentTypeError(f"bandwidth must be positive, got {b}")
    return b


def _noise_model(args) -> NoiseModel:
    return NoiseModel(args.noise, sigma=args.sigma) if args.noise == GAUSSIAN \
        else NoiseModel(args.noise)


_KNOWN_H = {
    "poisson": lambda u: np.asarray(u, dtype=float),
    "exponential": lambda u: np.asarray(u, dtype=float) ** 2,
}


def _estimator_config(args) -> EstimatorConfig:
    known = None
    if getattr(args, "known_h", None):
        if args.known_h == "gaussian":
            sig2 = args.sigma**2
            known = lambda u, _s=sig2: np.full_like(np.asarray(u, dtype=float), _s)
        else:
            known = _KNOWN_H[args.known_h]
    return EstimatorConfig(
        max_level=args.jstar,
        rule=args.rule,
        translation_invariant=args.ti,
        shift_stride=args.stride,
        basis=basis_by_name(args.basis),
        known_variance=known,
        varfn=VarFnConfig(half_window=args.M, bandwidth=args.bandwidth,
                          grid_size=args.grid),
    )


def _add_estimator_flags(p: argparse.ArgumentParser, default_m: int) -> None:
    p.add_argument("--rule", choices=("hard", "soft"), default="hard")
    p.add_argument("--ti", action=argparse.BooleanOptionalAction, default=True,
                   help="average over circular shifts (translation invariance)")
    p.add_argument("--jstar", type=int, default=None,
                   help="number of thresholded coarse levels (default: depth - 2)")
    p.add_argument("--stride", type=int, default=1,
                   help="thin the shift set to every stride-th shift")
    p.add_argument("--basis", default="haar",
                   choices=("haar", "daub4", "daub6", "daub8"))
    _add_varfn_flags(p, default_m)


def _add_varfn_flags(p: argparse.ArgumentParser, default_m: int) -> None:
    p.add_argument("--M", type=int, default=default_m,
                   help="running-mean half width of the variance fit")
    p.add_argument("--bandwidth", type=_bandwidth, default="auto")
    p.add_argument("--grid", type=int, default=256,
                   help="grid size of the variance step function")


# --------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    truth = SIGNAL_GENERATORS[args.signal](args.n, args.min, args.max)
    noisy = sample_noise(truth, _noise_model(args), SeedSpec(args.seed, args.rep))
    prefix = Path(args.out)
    header = [f"signal={args.signal} n={args.n} min={args.min} max={args.max}",
              f"noise={args.noise} sigma={args.sigma} seed={args.seed} rep={args.rep}"]
    write_series(prefix.with_name(prefix.name + "_truth.txt"), truth, header)
    write_series(prefix.with_name(prefix.name + "_noisy.txt"), noisy, header)
    return 0


def cmd_estimate(args) -> int:
    x = read_series(args.input)
    cfg = _estimator_config(args)
    if args.baseline:
        write_series(args.out, baseline_mad_estimate(x, cfg))
        return 0
    res = estimate(x, cfg)
    write_series(args.out, res.values)
    if args.emit_plots:
        thr_lines = []
        for j, (thr, surv) in enumerate(zip(res.thresholds, res.survivors)):
            thr_lines.extend(f"{j} {k + 1} {t:.17g} {int(s)}"
                             for k, (t, s) in enumerate(zip(thr, surv)))
        write_lines(_sidecar(args.out, "thresholds"), thr_lines)
        if isinstance(res.variance_fn, VarianceEstimate):
            write_lines(_sidecar(args.out, "varfn"), res.variance_fn.as_lines())
        n = x.size
        grid = np.arange(1, n + 1) / n
        write_lines(_sidecar(args.out, "plot_estimate"),
                    [f"{t:.17g} {v:.17g}" for t, v in zip(grid, res.values)])
        write_lines(_sidecar(args.out, "plot_input"),
                    [f"{t:.17g} {v:.17g}" for t, v in zip(grid, x)])
    return 0


def cmd_varfn(args) -> int:
    x = read_series(args.input)
    cfg = VarFnConfig(half_window=args.M, bandwidth=args.bandwidth, grid_size=args.grid)
    est = estimate_variance_function(x, cfg)
    write_lines(args.out, est.as_lines())
    if args.emit_plots:
        write_lines(_sidecar(args.out, "sqrt"),
                    [f"{u:.17g} {np.sqrt(v):.17g}" for u, v in zip(est.grid_u, est.values)])
    return 0


def cmd_vst(args) -> int:
    if args.mode == "forward":
        x = read_series(args.input)
        cfg = VarFnConfig(half_window=args.M, bandwidth=args.bandwidth,
                          grid_size=args.grid)
        hhat = estimate_variance_function(x, cfg)
        xt, state = forward_vst(x, hhat, basis_by_name(args.basis))
        write_series(args.out, xt)
        write_lines(args.divisors, divisors_as_lines(state))
    else:
        y = read_series(args.input)
        with open(args.divisors, encoding="utf-8") as f:
            state = divisors_from_lines(f)
        write_series(args.out, inverse_vst(y, state))
    return 0


# -------------------------------------------------------------- benchmark

@dataclass
class BenchReport:
    """Per-cell mean squared errors of the two methods, with standard errors."""

    reps: int
    n: int
    master_seed: int
    mse: dict  # (signal, noise, method) -> np.ndarray of per-rep MSEs

    def cell_stats(self, signal, noise, method):
        vals = self.mse[(signal, noise, method)]
        se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        return float(np.mean(vals)), se

    def as_lines(self) -> list[str]:
        lines = [f"# bench reps={self.reps} n={self.n} master_seed={self.master_seed}",
                 "# per-point mean squared error against the true signal",
                 "method " + " ".join(f"{s}_{m[:4]}" for s, m in BENCH_CELLS)]
        for method in BENCH_METHODS:
            means = [self.cell_stats(s, m, method)[0] for s, m in BENCH_CELLS]
            lines.append(method + " " + " ".join(f"{v:.6f}" for v in means))
        for method in BENCH_METHODS:
            ses = [self.cell_stats(s, m, method)[1] for s, m in BENCH_CELLS]
            lines.append(method + "_se " + " ".join(f"{v:.6f}" for v in ses))
        return lines


def _bench_worker(task) -> tuple[float, float]:
    signal, noise, n, master_seed, rep, cfg_kw = task
    lo, hi = BENCH_RANGES[signal]
    truth = SIGNAL_GENERATORS[signal](n, lo, hi)
    x = sample_noise(truth, NoiseModel(noise), SeedSpec(master_seed, rep))
    cfg = EstimatorConfig(
        max_level=cfg_kw["jstar"], rule=cfg_kw["rule"],
        translation_invariant=cfg_kw["ti"], shift_stride=cfg_kw["stride"],
        basis=basis_by_name(cfg_kw["basis"]),
        varfn=VarFnConfig(half_window=cfg_kw["M"], bandwidth=cfg_kw["bandwidth"],
                          grid_size=cfg_kw["grid"]),
    )
    wf = estimate(x, cfg).values
    base = baseline_mad_estimate(x, cfg)
    return float(np.mean((wf - truth) ** 2)), float(np.mean((base - truth) ** 2))


def worker_count() -> int:
    return max(1, int(os.environ.get("FISZKIT_THREADS", "1")))


def run_bench(reps: int, n: int, master_seed: int, cfg_kw: dict) -> BenchReport:
    """Run all four cells; deterministic regardless of worker count.

    Replication r uses the stream keyed by (master_seed, r), r = 1..reps,
    and results are gathered by task order, so parallelism cannot change
    the report.
    """
    tasks = [(signal, noise, n, master_seed, rep, cfg_kw)
             for signal, noise in BENCH_CELLS
             for rep in range(1, reps + 1)]
    workers = worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_bench_worker, tasks, chunksize=4))
    else:
        results = [_bench_worker(t) for t in tasks]
    mse = {}
    for i, (signal, noise) in enumerate(BENCH_CELLS):
        cell = results[i * reps:(i + 1) * reps]
        mse[(signal, noise, "wavefisz")] = np.array([r[0] for r in cell])
        mse[(signal, noise, "mad-baseline")] = np.array([r[1] for r in cell])
    return BenchReport(reps, n, master_seed, mse)


def cmd_bench(args) -> int:
    cfg_kw = dict(jstar=args.jstar, rule=args.rule, ti=args.ti, stride=args.stride,
                  basis=args.basis, M=args.M, bandwidth=args.bandwidth, grid=args.grid)
    report = run_bench(args.reps, args.n, args.seed, cfg_kw)
    write_lines(args.out, report.as_lines())
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiszkit",
                                     description="Wavelet denoising with mean-linked thresholds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a benchmark signal and a noisy sample")
    p.add_argument("--signal", choices=sorted(SIGNAL_GENERATORS), required=True)
    p.add_argument("--n", type=_dyadic, required=True)
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--noise", choices=("poisson", "exponential", "gaussian"), required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix (writes <out>_truth.txt, <out>_noisy.txt)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="denoise a series from a file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--known-h", choices=("poisson", "exponential", "gaussian"), default=None)
    p.add_argument("--sigma", type=float, default=1.0, help="noise sd for --known-h gaussian")
    p.add_argument("--baseline", action="store_true",
                   help="use the running-MAD comparator instead")
    p.add_argument("--emit-plots", action="store_true")
    _add_estimator_flags(p, default_m=1)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("varfn", help="estimate the mean-to-variance step function")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-plots", action="store_true",
                   help="also write the square-root step function")
    _add_varfn_flags(p, default_m=3)
    p.set_defaults(func=cmd_varfn)

    p = sub.add_parser("vst", help="variance-stabilise a series, or undo it")
    p.add_argument("mode", choices=("forward", "inverse"))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--divisors", required=True,
                   help="divisor file (written by forward, read by inverse)")
    p.add_argument("--basis", default="haar", choices=("haar", "daub4", "daub6", "daub8"))
    _add_varfn_flags(p, default_m=1)
    p.set_defaults(func=cmd_vst)

    p = sub.add_parser("bench", help="mean-squared-error table over seeded replications")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--n", type=_dyadic, default=2048)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_estimator_flags(p, default_m=1)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"fiszkit: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
