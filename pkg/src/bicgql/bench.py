"""Condition-number-binned accuracy experiments.

Each case solves ``A x = b`` with BiCG (or CG), computes the exact errors
of every iterate from a direct solve and compares the online estimates
with two baselines: the relative residual and the one-shot
Golub-Meurant estimates. Per-iteration ratios are averaged per case,
then across the cases of a bin.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimators import golub_meurant
from .linalg import direct_solve
from .matgen import HPD, GenSpec, gen_matrix, gen_rhs_suite
from .solvers import StoppingCriterion, Termination, bicg_solve, cg_solve

__all__ = [
    "METRICS",
    "REPORT_COLUMNS",
    "BinSpec",
    "BinReport",
    "CaseResult",
    "DegenerateCase",
    "decade_bins",
    "metric_anorm_vs_residual",
    "metric_l2_vs_residual",
    "metric_vs_gm",
    "run_case",
    "run_bin",
    "run_bins",
    "write_reports",
    "emit_trace_plot",
]

METRICS = ("anorm_vs_residual", "l2_vs_residual", "anorm_vs_gm", "l2_vs_gm")
REPORT_COLUMNS = ("bin_lo", "bin_hi", "metric_name", "mean", "median", "geomean", "n_cases", "n_breakdowns")

EPS = np.finfo(float).eps
# iterations whose true errors fell below this multiple of eps times the
# initial error are considered converged and left out
FLOOR = 1e2
MAX_RETRIES = 3


class DegenerateCase(ZeroDivisionError):
    """The baseline's error vanished, so the ratio is undefined."""


def _ratio(num: float, den: float, scale: float) -> float:
    # ``den`` is a difference of two quantities of size ``scale``; at
    # rounding level it carries no information
    if num == 0.0:
        return 0.0
    if not math.isfinite(den) or abs(den) <= FLOOR * EPS * scale:
        raise DegenerateCase(f"baseline error {den!r} is at rounding level")
    return abs(num / den)


def metric_anorm_vs_residual(g_k, true_eA, r_norm, b_norm, true_e2, x_A_norm, x_2norm) -> float:
    """Relative A-norm estimation error over the residual's relative l2 error.

    ``g_k`` is the estimated A-norm of the error (a norm, not its square).
    The ``||x||`` normalizations cancel in both relative errors but are
    kept so the expression reads like the definition.

    Raises
    ------
    DegenerateCase
        If ``||r||/||b||`` and ``||e||/||x||`` agree to rounding level
        while the estimate is inexact.
    """
    est_rel = (g_k / x_A_norm - true_eA / x_A_norm) / (true_eA / x_A_norm)
    rel_res, rel_err = r_norm / b_norm, true_e2 / x_2norm
    res_rel = (rel_res - rel_err) / rel_err
    return _ratio(est_rel, res_rel, max(rel_res, rel_err) / rel_err)


def metric_l2_vs_residual(f_k, true_e2, r_norm, b_norm, x_2norm) -> float:
    """``|(f/||x|| - ||e||/||x||) / (||r||/||b|| - ||e||/||x||)|`` with ``f`` a norm."""
    rel_res, rel_err = r_norm / b_norm, true_e2 / x_2norm
    return _ratio(f_k / x_2norm - rel_err, rel_res - rel_err, max(rel_res, rel_err))


def metric_vs_gm(est, gm_est, true_norm, x_norm) -> float:
    """``|(est - true) / (gm_est - true)|`` after dividing everything by ``||x||``."""
    t, gm = true_norm / x_norm, gm_est / x_norm
    return _ratio(est / x_norm - t, gm - t, max(abs(gm), t))


@dataclass(frozen=True)
class BinSpec:
    """One condition-number bin.

    ``kappa`` of each matrix is drawn log-uniformly from
    ``[kappa_lo, kappa_hi]``; ``kappa_lo == kappa_hi`` pins it.
    """

    kappa_lo: float
    kappa_hi: float
    matrices_per_bin: int = 10
    rhs_per_matrix: int = 10
    dim: int = 100
    d1: int = 4
    d2: int = 4
    method: str = "bicg"
    klass: str = HPD
    seed: int = 0
    tol: float = 1e-10
    max_iter: int | None = None
    gm_delay: int = 0
    l2_variant: str = "consistent"

    def __post_init__(self):
        if not 1 <= self.kappa_lo <= self.kappa_hi:
            raise ValueError("need 1 <= kappa_lo <= kappa_hi")
        if self.matrices_per_bin < 1 or self.rhs_per_matrix < 1:
            raise ValueError("counts must be >= 1")
        if self.rhs_per_matrix > self.dim:
            raise ValueError("rhs_per_matrix cannot exceed dim")
        if min(self.d1, self.d2, self.gm_delay) < 0:
            raise ValueError("delays must be non-negative")
        if self.method not in ("cg", "bicg"):
            raise ValueError("bench method must be 'cg' or 'bicg'")
        if self.method == "cg" and self.klass != HPD:
            raise ValueError("cg needs the HPD class")

    @property
    def iteration_cap(self) -> int:
        return 4 * self.dim if self.max_iter is None else self.max_iter

    def kappas(self) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 0])
        lo, hi = math.log10(self.kappa_lo), math.log10(self.kappa_hi)
        return 10.0 ** rng.uniform(lo, hi, self.matrices_per_bin)


def decade_bins(n_bins: int = 6, **kwargs) -> list:
    """Bins ``[1, 10], [10, 100], ...``; ``seed`` is offset by the bin index."""
    seed = kwargs.pop("seed", 0)
    return [BinSpec(10.0**i, 10.0 ** (i + 1), seed=seed + i, **kwargs) for i in range(n_bins)]


@dataclass
class CaseResult:
    """Per-case mean of each metric (nan when no iteration qualified)."""

    matrix_index: int
    rhs_index: int
    values: dict
    iterations: int
    termination: str
    retries: int = 0
    breakdown: bool = False
    degenerate_iters: int = 0


@dataclass
class BinReport:
    spec: BinSpec
    cases: list = field(default_factory=list)

    @property
    def n_total(self) -> int:
        return len(self.cases)

    @property
    def n_breakdowns(self) -> int:
        return sum(c.breakdown for c in self.cases)

    @property
    def retries(self) -> int:
        return sum(c.retries for c in self.cases)

    def values(self, metric: str) -> np.ndarray:
        v = np.array([c.values.get(metric, math.nan) for c in self.cases if not c.breakdown])
        return v[np.isfinite(v)]

    def n_degenerate(self, metric: str) -> int:
        """Cases that ran but produced no usable iteration for ``metric``."""
        return self.n_total - self.n_breakdowns - len(self.values(metric))

    def summary(self, metric: str) -> dict:
        v = self.values(metric)
        if len(v) == 0:
            mean = median = geomean = math.nan
        else:
            mean, median = float(np.mean(v)), float(np.median(v))
            geomean = 0.0 if np.any(v == 0) else float(np.exp(np.mean(np.log(v))))
        return {
            "bin_lo": self.spec.kappa_lo,
            "bin_hi": self.spec.kappa_hi,
            "metric_name": metric,
            "mean": mean,
            "median": median,
            "geomean": geomean,
            "n_cases": len(v),
            "n_breakdowns": self.n_breakdowns,
        }

    def mean(self, metric: str) -> float:
        return self.summary(metric)["mean"]


def _truncated_sum(terms, start, stop):
    return float(np.sum(terms[start:stop]))


def _estimates(trace, d1, d2, variant):
    """Delayed A-norm and l2 estimates (squared, signed) for every target.

    Near the end of a converged run the window is cut at the last record
    since the remaining terms are zero.
    """
    from .estimators import l2_decrement

    K = len(trace)
    terms = trace.step_coeffs * trace.res_norm_sqs
    converged = trace.termination is Termination.CONVERGED
    g = np.full(K, np.nan)
    for j in range(K):
        if j + d1 < K or converged:
            g[j] = _truncated_sum(terms, j, min(j + d1 + 1, K))
    f = np.full(K, np.nan)
    mus = trace.mus
    for j in range(K):
        if j + d1 + d2 >= K and not converged:
            continue
        total = 0.0
        for i in range(j, min(j + d2 + 1, K)):
            if not np.isfinite(g[i]):
                total = math.nan
                break
            total += l2_decrement(g[i], terms[i], mus[i], variant)
        f[j] = total
    return g, f


def run_case(A, b, spec: BinSpec, shadow=None) -> tuple:
    """Solve one case and return ``(values, trace, degenerate_iters)``."""
    op = A
    M = op.entries
    x_true = direct_solve(op, b)
    criterion = StoppingCriterion("residual", spec.tol)
    if spec.method == "cg":
        _, trace = cg_solve(op, b, max_iter=spec.iteration_cap, criterion=criterion, store_iterates=True)
    else:
        _, trace = bicg_solve(op, b, shadow_r0=shadow, max_iter=spec.iteration_cap, criterion=criterion,
                              store_iterates=True)
    if trace.termination is Termination.BREAKDOWN:
        return None, trace, 0

    K = len(trace)
    X = trace.iterates[:K]
    E = x_true - X
    eA = np.sqrt(np.abs(np.einsum("ij,jk,ik->i", E, M, E)))
    e2 = np.linalg.norm(E, axis=1)
    r_norm = np.sqrt(trace.res_norm_sqs)
    b_norm = float(np.linalg.norm(b))
    x_A = math.sqrt(abs(float(x_true @ M @ x_true)))
    x_2 = float(np.linalg.norm(x_true))

    g, f = _estimates(trace, spec.d1, spec.d2, spec.l2_variant)
    g_gm, f_gm = _estimates(trace, spec.gm_delay, spec.gm_delay, spec.l2_variant)

    per = {m: [] for m in METRICS}
    degenerate = 0
    for k in range(K):
        if eA[k] <= FLOOR * EPS * eA[0] or e2[k] <= FLOOR * EPS * e2[0]:
            continue
        r_true = b - M @ X[k]
        gm_a, gm_2 = golub_meurant(op, r_true)
        pairs = (
            ("anorm_vs_residual", g[k],
             lambda v: metric_anorm_vs_residual(v, eA[k], r_norm[k], b_norm, e2[k], x_A, x_2)),
            ("l2_vs_residual", f[k], lambda v: metric_l2_vs_residual(v, e2[k], r_norm[k], b_norm, x_2)),
            ("anorm_vs_gm", g_gm[k], lambda v: metric_vs_gm(v, math.sqrt(abs(gm_a)), eA[k], x_A)),
            ("l2_vs_gm", f_gm[k], lambda v: metric_vs_gm(v, math.sqrt(abs(gm_2)), e2[k], x_2)),
        )
        for name, est_sq, fn in pairs:
            if not np.isfinite(est_sq):
                continue
            try:
                per[name].append(fn(math.sqrt(abs(est_sq))))
            except DegenerateCase:
                degenerate += 1
    values = {m: (float(np.mean(v)) if v else math.nan) for m, v in per.items()}
    return values, trace, degenerate


def _shadow(spec: BinSpec, m: int, i: int, attempt: int, dim: int):
    rng = np.random.default_rng([spec.seed, m, i, attempt])
    return rng.standard_normal(dim)


def _run_matrix(args) -> list:
    spec, m, kappa = args
    A = gen_matrix(GenSpec(spec.dim, float(kappa), spec.klass, seed=(spec.seed * 1_000_003 + m) % 2**32))
    out = []
    for i, b in enumerate(gen_rhs_suite(spec.dim, spec.rhs_per_matrix, seed=(spec.seed * 1_000_003 + m) % 2**32)):
        values, trace, degenerate = run_case(A, b, spec)
        retries = 0
        while values is None and retries < MAX_RETRIES and spec.method == "bicg":
            retries += 1
            values, trace, degenerate = run_case(A, b, spec, shadow=_shadow(spec, m, i, retries, spec.dim))
        out.append(CaseResult(
            matrix_index=m,
            rhs_index=i,
            values=values if values is not None else {},
            iterations=len(trace),
            termination=trace.termination.value,
            retries=retries,
            breakdown=values is None,
            degenerate_iters=degenerate,
        ))
    return out


def run_bin(spec: BinSpec, jobs: int = 1) -> BinReport:
    tasks = [(spec, m, kappa) for m, kappa in enumerate(spec.kappas())]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_matrix, tasks))
    else:
        chunks = [_run_matrix(t) for t in tasks]
    cases = sorted((c for chunk in chunks for c in chunk), key=lambda c: (c.matrix_index, c.rhs_index))
    return BinReport(spec, cases)


def run_bins(specs, output_path=None, jobs: int = 1) -> list:
    """Run every bin; write the summary CSV to ``output_path`` if given."""
    reports = [run_bin(s, jobs=jobs) for s in specs]
    if output_path is not None:
        write_reports(output_path, reports)
    return reports


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_reports(path, reports, metrics=METRICS):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for rep in reports:
            for m in metrics:
                s = rep.summary(m)
                w.writerow([_fmt(s[c]) if c != "metric_name" else s[c] for c in REPORT_COLUMNS])


def emit_trace_plot(trace, estimates: dict, oracle: dict, output_path) -> tuple:
    """Write per-iteration series as gnuplot text plus a CSV twin.

    ``estimates`` maps column names to :class:`EstimateSeries` (keyed by
    target iterate) or to arrays; ``oracle`` maps names to arrays indexed
    by iterate. Missing entries are written as ``nan``. Values use
    ``repr`` so the files read back bit-exactly. Returns the two paths.
    """
    from pathlib import Path

    K = len(trace)
    columns = {**oracle, **estimates}
    names = ["k"] + list(columns)
    rows = []
    for k in range(K):
        row = [str(k)]
        for series in columns.values():
            if hasattr(series, "values") and isinstance(series.values, dict):
                v = series.values.get(k, math.nan)
            else:
                v = series[k] if k < len(series) else math.nan
            row.append(repr(float(v)))
        rows.append(row)

    dat = Path(output_path)
    twin = dat.with_suffix(".csv")
    with open(dat, "w") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for row in rows:
            fh.write(" ".join(row) + "\n")
    with open(twin, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows(rows)
    return dat, twin
