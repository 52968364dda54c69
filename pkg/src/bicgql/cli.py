"""Command-line front end: ``bicgql {gen,solve,estimate,bench} [options]``.

Exit codes: 0 converged (or command finished), 1 bad configuration,
2 iteration limit reached, 3 breakdown.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import bench
from .estimators import (
    SpectrumBounds,
    SpectrumViolation,
    anorm_series,
    cgql_series,
    l2_series,
    residual_series,
    write_series_csv,
)
from .linalg import Operator, direct_solve, read_matrix, read_vector, write_matrix, write_vector
from .matgen import CLASSES, HPD, NONSYM, GenSpec, gen_matrix, gen_rhs_suite
from .solvers import StoppingCriterion, Termination, solve

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAXITER = 2
EXIT_BREAKDOWN = 3

EXIT_CODES = {
    Termination.CONVERGED: EXIT_OK,
    Termination.MAX_ITER: EXIT_MAXITER,
    Termination.BREAKDOWN: EXIT_BREAKDOWN,
}

CLASS_ALIASES = {"hpd": HPD, "nonsym": NONSYM, HPD.lower(): HPD, NONSYM.lower(): NONSYM}

# every option with its default; None means "depends on the command",
# resolved in _resolve
DEFAULTS = {
    "matrix": None,
    "rhs": None,
    "gen_kappa": 100.0,
    "gen_class": None,
    "dim": 100,
    "method": "bicg",
    "criterion": "residual",
    "tol": 1e-10,
    "max_iter": None,
    "d1": None,
    "d2": None,
    "l2_variant": "consistent",
    "bins": "6",
    "matrices": 10,
    "cases": 10,
    "seed": 0,
    "out": ".",
    "jobs": 1,
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _gen_class(text: str) -> str:
    key = text.strip().lower()
    if key == "all":
        return "all"
    if key not in CLASS_ALIASES:
        raise argparse.ArgumentTypeError(f"unknown matrix class {text!r} (HPD, nonsym or all)")
    return CLASS_ALIASES[key]


def _add_options(p):
    S = argparse.SUPPRESS
    g = p.add_argument_group("matrix and right-hand side")
    g.add_argument("--matrix", default=S, help="Matrix Market file (default: generate one)")
    g.add_argument("--rhs", default=S, help="Matrix Market vector (default: a seeded canonical vector)")
    g.add_argument("--gen-kappa", type=float, default=S, help="condition number of the generated matrix (default 100)")
    g.add_argument("--gen-class", type=_gen_class, default=S,
                   help="HPD, nonsym, or all for bench (default HPD; bench: all)")
    g.add_argument("--dim", type=int, default=S, help="dimension of generated matrices (default 100)")
    g.add_argument("--seed", type=int, default=S, help="seed for generation and bench (default 0)")

    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=("cg", "bicg", "bicgstab"), default=S, help="(default bicg)")
    g.add_argument("--criterion", choices=StoppingCriterion.KINDS, default=S,
                   help="stopping rule (default residual)")
    g.add_argument("--tol", type=float, default=S,
                   help="threshold: relative residual, or absolute error norm for anorm/l2 (default 1e-10)")
    g.add_argument("--max-iter", type=int, default=S, help="iteration limit (default 10*dim, bench 4*dim)")
    g.add_argument("--d1", type=int, default=S, help="A-norm delay (default 0; bench 4)")
    g.add_argument("--d2", type=int, default=S, help="extra l2 delay (default 0; bench 4)")
    g.add_argument("--l2-variant", choices=("consistent", "paper"), default=S,
                   help="l2 decrement formula (default consistent)")

    g = p.add_argument_group("bench")
    g.add_argument("--bins", default=S,
                   help="number of decade bins from kappa=1, or lo:hi pairs separated by commas (default 6)")
    g.add_argument("--matrices", type=int, default=S, help="matrices per bin (default 10)")
    g.add_argument("--cases", type=int, default=S, help="right-hand sides per matrix (default 10)")
    g.add_argument("--jobs", type=int, default=S, help="worker processes for bench (default 1)")

    g = p.add_argument_group("output")
    g.add_argument("--out", default=S, help="output directory (default .)")
    g.add_argument("--config", default=None, help="key=value file; command-line flags override it")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bicgql", description="BiCG/CG solvers with online error-norm estimates.")
    sub = p.add_subparsers(dest="command", metavar="{gen,solve,estimate,bench}", parser_class=_Parser)
    helps = {
        "gen": "write a generated matrix and right-hand side",
        "solve": "solve one system; write solution, trace and estimates",
        "estimate": "solve with ground truth; write per-iteration plot data",
        "bench": "run the condition-number bins; write summary CSVs and bar data",
    }
    for name, h in helps.items():
        _add_options(sub.add_parser(name, help=h, description=h))
    return p


def read_config(path) -> list:
    """Turn a ``key=value`` file into command-line tokens.

    Blank lines and ``#`` comments are skipped; keys may use ``-`` or ``_``.
    """
    tokens = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        tokens += ["--" + key.replace("_", "-"), value]
    return tokens


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    merged = dict(DEFAULTS)
    if args.config:
        try:
            tokens = read_config(args.config)
        except ConfigError as exc:
            parser.exit(EXIT_CONFIG, f"bicgql: error: {exc}\n")
        merged.update(vars(parser.parse_args([args.command] + tokens)))
    merged.update(vars(args))
    merged.pop("config", None)
    return _resolve(argparse.Namespace(**merged))


def _resolve(cfg):
    bench_mode = cfg.command == "bench"
    if cfg.gen_class is None:
        cfg.gen_class = "all" if bench_mode else HPD
    if cfg.gen_class == "all" and not bench_mode:
        raise ConfigError("--gen-class all is only valid for bench")
    for name in ("d1", "d2"):
        if getattr(cfg, name) is None:
            setattr(cfg, name, 4 if bench_mode else 0)
        if getattr(cfg, name) < 0:
            raise ConfigError(f"--{name} must be non-negative")
    if cfg.dim < 2:
        raise ConfigError("--dim must be at least 2")
    if not (math.isfinite(cfg.tol) and cfg.tol > 0):
        raise ConfigError("--tol must be positive")
    if cfg.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    if cfg.max_iter is not None and cfg.max_iter < 1:
        raise ConfigError("--max-iter must be at least 1")
    return cfg


# -- helpers ------------------------------------------------------------------

def _load_system(cfg):
    if cfg.matrix is not None:
        A = read_matrix(cfg.matrix)
    else:
        A = gen_matrix(GenSpec(cfg.dim, cfg.gen_kappa, cfg.gen_class, seed=cfg.seed))
    if cfg.rhs is not None:
        b = read_vector(cfg.rhs)
        if b.shape != (A.dim,):
            raise ConfigError(f"right-hand side has length {len(b)}, matrix has dim {A.dim}")
    else:
        b = gen_rhs_suite(A.dim, 1, seed=cfg.seed)[0]
    return A, b


def _outdir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_solver(cfg, A, b, store_iterates=False):
    criterion = StoppingCriterion(cfg.criterion, cfg.tol, cfg.d1, cfg.d2, cfg.l2_variant)
    if cfg.method == "cg" and not A.is_symmetric():
        raise ConfigError("cg needs a symmetric matrix; use --method bicg")
    return solve(cfg.method, A, b, max_iter=cfg.max_iter, criterion=criterion, store_iterates=store_iterates)


def _series(cfg, trace):
    out = [residual_series(trace)]
    if cfg.method != "bicgstab":
        out.insert(0, anorm_series(trace, cfg.d1))
        out.insert(1, l2_series(trace, cfg.d1, cfg.d2, cfg.l2_variant))
    return out


def _report(trace):
    rel = math.sqrt(trace.final_res_norm_sq) / trace.b_norm if trace.b_norm else 0.0
    print(f"{trace.method}: {trace.termination.value} after {len(trace)} iterations, "
          f"relative residual {rel:.6e}")
    if trace.message:
        print(trace.message, file=sys.stderr)
    return EXIT_CODES[trace.termination]


# -- commands -----------------------------------------------------------------

def cmd_gen(cfg) -> int:
    if cfg.matrix is not None:
        raise ConfigError("gen takes no --matrix")
    out = _outdir(cfg)
    A, b = _load_system(cfg)
    write_matrix(out / "matrix.mtx", A)
    write_vector(out / "rhs.mtx", b)
    print(f"wrote {out / 'matrix.mtx'} and {out / 'rhs.mtx'}")
    return EXIT_OK


def cmd_solve(cfg) -> int:
    out = _outdir(cfg)
    A, b = _load_system(cfg)
    x, trace = _run_solver(cfg, A, b)
    write_vector(out / "solution.mtx", x)
    trace.to_csv(out / "trace.csv")
    write_series_csv(out / "estimates.csv", _series(cfg, trace))
    return _report(trace)


def cmd_estimate(cfg) -> int:
    out = _outdir(cfg)
    A, b = _load_system(cfg)
    x, trace = _run_solver(cfg, A, b, store_iterates=True)
    write_vector(out / "solution.mtx", x)
    trace.to_csv(out / "trace.csv")
    write_series_csv(out / "estimates.csv", _series(cfg, trace))

    x_true = direct_solve(A, b)
    M = A.entries
    E = x_true - trace.iterates[: len(trace)]
    oracle = {
        "true_anorm_sq": np.abs(np.einsum("ij,jk,ik->i", E, M, E)),
        "true_l2_sq": np.einsum("ij,ij->i", E, E),
        "residual_norm": np.sqrt(trace.res_norm_sqs),
    }
    est = {}
    if cfg.method != "bicgstab":
        est["bicgql_g"] = anorm_series(trace, cfg.d1)
        est["bicgql_f"] = l2_series(trace, cfg.d1, cfg.d2, cfg.l2_variant)
        ev = np.linalg.eigvalsh(0.5 * (M + M.T)) if A.is_symmetric() else None
        if ev is not None and ev[0] > 0 and len(trace) > cfg.d1:
            try:
                cg = cgql_series(trace, SpectrumBounds(float(ev[0]), float(ev[-1])), cfg.d1)
                est["cgql_gauss"] = cg["gauss"]
                est["cgql_lobatto"] = cg["lobatto"]
            except SpectrumViolation as exc:
                print(f"skipping quadrature bounds: {exc}", file=sys.stderr)
    bench.emit_trace_plot(trace, est, oracle, out / "trace_plot.dat")
    return _report(trace)


def _parse_bins(text: str):
    text = str(text).strip()
    if ":" not in text:
        n = int(text)
        if n < 1:
            raise ConfigError("--bins must be at least 1")
        return [(10.0**i, 10.0 ** (i + 1)) for i in range(n)]
    bins = []
    for part in text.split(","):
        lo, hi = part.split(":")
        bins.append((float(lo), float(hi)))
    return bins


def cmd_bench(cfg) -> int:
    if cfg.method not in ("cg", "bicg"):
        raise ConfigError("bench supports --method cg or bicg")
    try:
        bins = _parse_bins(cfg.bins)
    except ValueError as exc:
        raise ConfigError(f"bad --bins {cfg.bins!r}: {exc}") from exc
    out = _outdir(cfg)
    classes = CLASSES if cfg.gen_class == "all" else (cfg.gen_class,)
    for klass in classes:
        if cfg.method == "cg" and klass != HPD:
            continue
        specs = [
            bench.BinSpec(lo, hi, matrices_per_bin=cfg.matrices, rhs_per_matrix=cfg.cases, dim=cfg.dim,
                          d1=cfg.d1, d2=cfg.d2, method=cfg.method, klass=klass, seed=cfg.seed + i,
                          tol=cfg.tol, max_iter=cfg.max_iter, l2_variant=cfg.l2_variant)
            for i, (lo, hi) in enumerate(bins)
        ]
        tag = "hpd" if klass == HPD else "nonsym"
        reports = bench.run_bins(specs, out / f"bins_{tag}.csv", jobs=cfg.jobs)
        for metric in bench.METRICS:
            with open(out / f"bars_{tag}_{metric}.dat", "w") as fh:
                fh.write("# bin_lo bin_hi mean median geomean n_cases n_breakdowns\n")
                for rep in reports:
                    s = rep.summary(metric)
                    fh.write(" ".join(bench._fmt(s[c]) for c in
                                      ("bin_lo", "bin_hi", "mean", "median", "geomean", "n_cases",
                                       "n_breakdowns")) + "\n")
        for rep in reports:
            means = " ".join(f"{m}={rep.mean(m):.4g}" for m in bench.METRICS)
            print(f"{tag} [{rep.spec.kappa_lo:g}, {rep.spec.kappa_hi:g}] {means}")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "estimate": cmd_estimate, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
        return COMMANDS[cfg.command](cfg)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    except (ConfigError, ValueError, OSError) as exc:
        print(f"bicgql: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
