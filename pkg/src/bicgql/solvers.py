"""CG, BiCG and BiCGSTAB with per-iteration coefficient traces.

Every solver returns ``(x, trace)``. The trace keeps the scalars the
online error estimators need (step length, beta, squared residual norm,
Rayleigh quotient of the search direction) so estimates can be computed
during or after the run without touching the operator again.

Breakdown does not raise by default: the solver stops, marks the trace
with ``Termination.BREAKDOWN`` and returns what it has. Pass
``strict=True`` to get a :class:`BreakdownError` instead.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_operator

__all__ = [
    "BreakdownError",
    "Termination",
    "IterationRecord",
    "SolveTrace",
    "StoppingCriterion",
    "cg_solve",
    "bicg_solve",
    "bicgstab_solve",
    "solve",
]

BREAKDOWN_RTOL = 1e-14


class BreakdownError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    BREAKDOWN = "Breakdown"


@dataclass
class IterationRecord:
    """Scalars produced by iteration ``k``.

    ``step_coeff`` is gamma_k for CG and alpha_k for BiCG/BiCGSTAB,
    ``beta`` is beta_{k+1}, ``res_norm_sq`` is ||r_k||^2 and ``mu_p`` is
    p_k^T A p_k / ||p_k||^2. ``x_snapshot`` holds x_k when requested.
    """

    k: int
    step_coeff: float
    beta: float
    res_norm_sq: float
    shadow_res_dot: float = math.nan
    mu_p: float = math.nan
    omega: float = math.nan
    x_snapshot: np.ndarray | None = field(default=None, repr=False)


TRACE_COLUMNS = ("k", "step_coeff", "beta", "res_norm_sq", "shadow_res_dot", "mu_p", "omega")


@dataclass
class SolveTrace:
    method: str
    r0_norm_sq: float
    b_norm: float = math.nan
    records: list = field(default_factory=list)
    termination: Termination | None = None
    final_res_norm_sq: float = math.nan
    x_final: np.ndarray | None = field(default=None, repr=False)
    message: str = ""

    def __len__(self):
        return len(self.records)

    def __getitem__(self, k):
        return self.records[k]

    def append(self, record: IterationRecord):
        if self.termination is not None:
            raise RuntimeError("trace is already terminated")
        if record.k != len(self.records):
            raise ValueError(f"record index {record.k} does not continue trace of length {len(self.records)}")
        self.records.append(record)

    def finish(self, termination: Termination, final_res_norm_sq: float, x_final=None, message: str = ""):
        if self.termination is not None:
            raise RuntimeError(f"trace already terminated as {self.termination.value}")
        self.termination = Termination(termination)
        self.final_res_norm_sq = float(final_res_norm_sq)
        self.x_final = None if x_final is None else np.array(x_final)
        self.message = message

    # vectorised views
    @property
    def step_coeffs(self) -> np.ndarray:
        return np.array([r.step_coeff for r in self.records], dtype=float)

    @property
    def betas(self) -> np.ndarray:
        return np.array([r.beta for r in self.records], dtype=float)

    @property
    def res_norm_sqs(self) -> np.ndarray:
        return np.array([r.res_norm_sq for r in self.records], dtype=float)

    @property
    def mus(self) -> np.ndarray:
        return np.array([r.mu_p for r in self.records], dtype=float)

    @property
    def iterates(self) -> np.ndarray:
        """x_0 .. x_K as rows, followed by the final iterate."""
        snaps = [r.x_snapshot for r in self.records]
        if any(s is None for s in snaps):
            raise ValueError("trace was recorded without iterates (use store_iterates=True)")
        rows = snaps + ([self.x_final] if self.x_final is not None else [])
        return np.array(rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.records:
                w.writerow([r.k] + [repr(float(getattr(r, c))) for c in TRACE_COLUMNS[1:]])


@dataclass(frozen=True)
class StoppingCriterion:
    """When to stop iterating.

    ``residual``: ||r_{k+1}|| / ||b|| <= threshold.
    ``anorm``: sqrt of the delayed A-norm estimate of eps_{k-d1} <= threshold.
    ``l2``: sqrt of the delayed l2 estimate of eps_{k-d1-d2} <= threshold.

    Estimate-based kinds are only evaluated once ``k >= d1 + d2``.
    Thresholds of the estimate kinds are absolute error norms.
    """

    kind: str = "residual"
    threshold: float = 1e-10
    d1: int = 0
    d2: int = 0
    variant: str = "consistent"

    KINDS = ("residual", "anorm", "l2")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown criterion kind {self.kind!r}; expected one of {self.KINDS}")
        if not (math.isfinite(self.threshold) and self.threshold > 0):
            raise ValueError("threshold must be finite and positive")
        if self.d1 < 0 or self.d2 < 0:
            raise ValueError("delays must be non-negative")

    def satisfied(self, trace: SolveTrace, next_res_norm_sq: float) -> bool:
        k = len(trace) - 1
        if self.kind == "residual":
            return math.sqrt(next_res_norm_sq) <= self.threshold * trace.b_norm
        if k < self.d1 + self.d2:
            return False
        from . import estimators

        if self.kind == "anorm":
            est = estimators.bicgql_anorm(trace, k, self.d1)
        else:
            est = estimators.bicgql_l2norm(trace, k, self.d1, self.d2, variant=self.variant)
        return math.sqrt(est) <= self.threshold


def _setup(A, b, x0, max_iter):
    op = as_operator(A)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (op.dim,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({op.dim},)")
    x = np.zeros(op.dim) if x0 is None else np.array(x0, dtype=np.float64)
    if max_iter is None:
        max_iter = 10 * op.dim
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    return op, b, x, max_iter


def _tiny(a, b):
    return BREAKDOWN_RTOL * a * b


def _breakdown(trace, rr, x, message, strict):
    trace.finish(Termination.BREAKDOWN, rr, x, message)
    if strict:
        raise BreakdownError(message, trace)


def cg_solve(A, b, x0=None, max_iter=None, criterion=None, *, store_iterates=False, strict=False,
             check_symmetric=True):
    """Conjugate gradients for symmetric positive definite ``A``.

    The trace holds gamma_k, beta_{k+1}, ||r_k||^2 and mu(p_k) for every
    completed step. A non-positive curvature ``p^T A p`` ends the run with
    ``Termination.BREAKDOWN``.
    """
    op, b, x, max_iter = _setup(A, b, x0, max_iter)
    if check_symmetric and not op.is_symmetric():
        raise ValueError("cg_solve requires a symmetric operator")
    criterion = criterion or StoppingCriterion()
    r = b - op.apply(x)
    p = r.copy()
    rr = float(r @ r)
    trace = SolveTrace("CG", r0_norm_sq=rr, b_norm=float(np.linalg.norm(b)))
    if rr == 0.0:
        trace.finish(Termination.CONVERGED, rr, x)
        return x, trace

    for k in range(max_iter):
        Ap = op.apply(p)
        pAp = float(p @ Ap)
        pp = float(p @ p)
        if pAp <= _tiny(math.sqrt(pp), np.linalg.norm(Ap)):
            _breakdown(trace, rr, x, f"non-positive curvature p^T A p = {pAp:.3e} at k={k}", strict)
            return x, trace
        gamma = rr / pAp
        snap = x.copy() if store_iterates else None
        x = x + gamma * p
        r = r - gamma * Ap
        rr_next = float(r @ r)
        beta = rr_next / rr
        trace.append(IterationRecord(k, gamma, beta, rr, mu_p=pAp / pp, x_snapshot=snap))
        if rr_next == 0.0 or criterion.satisfied(trace, rr_next):
            trace.finish(Termination.CONVERGED, rr_next, x)
            return x, trace
        p = r + beta * p
        rr = rr_next

    trace.finish(Termination.MAX_ITER, rr, x)
    return x, trace


def bicg_solve(A, b, x0=None, shadow_r0=None, max_iter=None, criterion=None, *, store_iterates=False,
               strict=False, shadow_update="standard"):
    """Biconjugate gradients.

    ``shadow_r0`` defaults to r_0. ``shadow_update="residual"`` builds the
    next shadow direction from the previous shadow *residual*
    (``pt = rt_{k+1} + beta * rt_k``) instead of the previous shadow
    direction; it exists only to measure how much bi-orthogonality that
    variant loses.
    """
    if shadow_update not in ("standard", "residual"):
        raise ValueError(f"unknown shadow_update {shadow_update!r}")
    op, b, x, max_iter = _setup(A, b, x0, max_iter)
    criterion = criterion or StoppingCriterion()
    r = b - op.apply(x)
    rt = r.copy() if shadow_r0 is None else np.array(shadow_r0, dtype=np.float64)
    if rt.shape != r.shape:
        raise ValueError("shadow_r0 has the wrong shape")
    p, pt = r.copy(), rt.copy()
    rr = float(r @ r)
    rho = float(rt @ r)
    trace = SolveTrace("BiCG", r0_norm_sq=rr, b_norm=float(np.linalg.norm(b)))
    if rr == 0.0:
        trace.finish(Termination.CONVERGED, rr, x)
        return x, trace

    for k in range(max_iter):
        if abs(rho) <= _tiny(np.linalg.norm(rt), math.sqrt(rr)):
            _breakdown(trace, rr, x, f"shadow inner product rt^T r = {rho:.3e} vanished at k={k}", strict)
            return x, trace
        Ap = op.apply(p)
        ptAp = float(pt @ Ap)
        if abs(ptAp) <= _tiny(np.linalg.norm(pt), np.linalg.norm(Ap)):
            _breakdown(trace, rr, x, f"pt^T A p = {ptAp:.3e} vanished at k={k}", strict)
            return x, trace
        alpha = rho / ptAp
        Atpt = op.apply_transpose(pt)
        snap = x.copy() if store_iterates else None
        x = x + alpha * p
        r = r - alpha * Ap
        rt_prev = rt
        rt = rt - alpha * Atpt
        rr_next = float(r @ r)
        rho_next = float(rt @ r)
        beta = rho_next / rho
        trace.append(IterationRecord(k, alpha, beta, rr, shadow_res_dot=rho,
                                     mu_p=float(p @ Ap) / float(p @ p), x_snapshot=snap))
        if rr_next == 0.0 or criterion.satisfied(trace, rr_next):
            trace.finish(Termination.CONVERGED, rr_next, x)
            return x, trace
        p = r + beta * p
        pt = rt + beta * (pt if shadow_update == "standard" else rt_prev)
        rr, rho = rr_next, rho_next

    trace.finish(Termination.MAX_ITER, rr, x)
    return x, trace


def bicgstab_solve(A, b, x0=None, max_iter=None, criterion=None, *, shadow_r0=None, store_iterates=False,
                   strict=False):
    """BiCGSTAB (van der Vorst).

    Records alpha_k, ||r_k||^2, mu(p_k) and the stabilising omega_k. A
    residual that vanishes after the half step ends the run as converged.
    """
    op, b, x, max_iter = _setup(A, b, x0, max_iter)
    criterion = criterion or StoppingCriterion()
    r = b - op.apply(x)
    rhat = r.copy() if shadow_r0 is None else np.array(shadow_r0, dtype=np.float64)
    rr = float(r @ r)
    trace = SolveTrace("BiCGSTAB", r0_norm_sq=rr, b_norm=float(np.linalg.norm(b)))
    if rr == 0.0:
        trace.finish(Termination.CONVERGED, rr, x)
        return x, trace

    p = r.copy()
    rho = float(rhat @ r)
    for k in range(max_iter):
        if abs(rho) <= _tiny(np.linalg.norm(rhat), math.sqrt(rr)):
            _breakdown(trace, rr, x, f"rhat^T r = {rho:.3e} vanished at k={k}", strict)
            return x, trace
        v = op.apply(p)
        rv = float(rhat @ v)
        if abs(rv) <= _tiny(np.linalg.norm(rhat), np.linalg.norm(v)):
            _breakdown(trace, rr, x, f"rhat^T A p = {rv:.3e} vanished at k={k}", strict)
            return x, trace
        alpha = rho / rv
        mu = float(p @ v) / float(p @ p)
        snap = x.copy() if store_iterates else None
        s = r - alpha * v
        ss = float(s @ s)
        if ss == 0.0:
            x = x + alpha * p
            trace.append(IterationRecord(k, alpha, 0.0, rr, shadow_res_dot=rho, mu_p=mu, omega=0.0,
                                         x_snapshot=snap))
            trace.finish(Termination.CONVERGED, 0.0, x)
            return x, trace
        t = op.apply(s)
        tt = float(t @ t)
        if tt == 0.0:
            _breakdown(trace, rr, x, f"A s vanished at k={k}", strict)
            return x, trace
        omega = float(t @ s) / tt
        x = x + alpha * p + omega * s
        r = s - omega * t
        rr_next = float(r @ r)
        rho_next = float(rhat @ r)
        beta = (rho_next / rho) * (alpha / omega) if omega != 0.0 else math.nan
        trace.append(IterationRecord(k, alpha, beta, rr, shadow_res_dot=rho, mu_p=mu, omega=omega,
                                     x_snapshot=snap))
        if rr_next == 0.0 or criterion.satisfied(trace, rr_next):
            trace.finish(Termination.CONVERGED, rr_next, x)
            return x, trace
        if omega == 0.0:
            _breakdown(trace, rr_next, x, f"stabilisation step omega vanished at k={k}", strict)
            return x, trace
        p = r + beta * (p - omega * v)
        rr, rho = rr_next, rho_next

    trace.finish(Termination.MAX_ITER, rr, x)
    return x, trace


def solve(method, A, b, x0=None, max_iter=None, criterion=None, **kwargs):
    """Dispatch on a method tag (``cg``, ``bicg`` or ``bicgstab``)."""
    method = method.lower()
    if method == "cg":
        return cg_solve(A, b, x0, max_iter, criterion, **kwargs)
    if method == "bicg":
        return bicg_solve(A, b, x0, kwargs.pop("shadow_r0", None), max_iter, criterion, **kwargs)
    if method == "bicgstab":
        return bicgstab_solve(A, b, x0, max_iter, criterion, **kwargs)
    raise ValueError(f"unknown method {method!r}")
