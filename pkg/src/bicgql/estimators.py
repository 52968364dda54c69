"""Online estimators of the A-norm and l2-norm of the error of CG/BiCG iterates.

The BiCGQL estimators read nothing but trace scalars, so evaluating them
costs O(d) flops and no operator applications. The A-norm estimate of
``eps_{k-d}`` at iteration ``k`` is the partial sum::

    g_{k-d} = sum_{j=k-d}^{k} alpha_j ||r_j||^2

and the l2 estimate of ``eps_{k-d1-d2}`` sums the per-step decrements of
the squared l2 error that follow from the Hestenes-Stiefel relation
between the two norms, with ``g`` standing in for the unknown A-norms.

For symmetric positive definite problems :func:`cgql_bounds` adds the
Gauss-Radau and Gauss-Lobatto rules, which need bounds on the spectrum.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .linalg import as_operator

__all__ = [
    "BoundDirection",
    "EstimateSeries",
    "SpectrumBounds",
    "CGQLBounds",
    "InsufficientHistory",
    "ZeroDirection",
    "ZeroDenominator",
    "SpectrumViolation",
    "bicgql_anorm",
    "bicgql_l2norm",
    "l2_decrement",
    "cgql_bounds",
    "golub_meurant",
    "residual_criterion",
    "anorm_series",
    "l2_series",
    "cgql_series",
    "residual_series",
    "write_series_csv",
]

MU_TINY = 1e-300
# spectrum bounds are widened by this much so Ritz values that converge to an
# exact bound within rounding cannot flip the sign of a shifted pivot
SPECTRUM_SLACK = 1e-10
INVARIANT_RTOL = 1e-14


class InsufficientHistory(IndexError):
    pass


class ZeroDirection(ZeroDivisionError):
    pass


class ZeroDenominator(ZeroDivisionError):
    pass


class SpectrumViolation(ArithmeticError):
    """A spectrum bound lies inside the spectrum of the Jacobi matrix."""


class BoundDirection(str, enum.Enum):
    LOWER = "Lower"
    UPPER = "Upper"
    HEURISTIC = "Heuristic"


class Variant(str, enum.Enum):
    CONSISTENT = "consistent"
    PAPER_LITERAL = "paper"


@dataclass
class EstimateSeries:
    """Estimates keyed by the index of the iterate they describe."""

    kind: str
    values: dict = field(default_factory=dict)
    d1: int = 0
    d2: int = 0
    bound_direction: BoundDirection = BoundDirection.HEURISTIC

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    @property
    def targets(self) -> np.ndarray:
        return np.array(sorted(self.values), dtype=int)

    def as_array(self) -> np.ndarray:
        return np.array([self.values[k] for k in sorted(self.values)], dtype=float)

    def rows(self):
        bd = BoundDirection(self.bound_direction).value
        for k in sorted(self.values):
            yield k, self.kind, self.values[k], self.d1, self.d2, bd


SERIES_COLUMNS = ("k_target", "kind", "value", "d1", "d2", "bound_direction")


def write_series_csv(path, series):
    """Write one or more :class:`EstimateSeries` into a single long-format CSV."""
    if isinstance(series, EstimateSeries):
        series = [series]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for s in series:
            for k, kind, v, d1, d2, bd in s.rows():
                w.writerow([k, kind, repr(float(v)), d1, d2, bd])


@dataclass(frozen=True)
class SpectrumBounds:
    lambda_min_est: float
    lambda_max_est: float

    def __post_init__(self):
        if not (0 < self.lambda_min_est <= self.lambda_max_est):
            raise ValueError("need 0 < lambda_min_est <= lambda_max_est")


class CGQLBounds(NamedTuple):
    gauss: float
    radau_lower: float
    radau_upper: float
    lobatto: float


def _check_k(trace, k, need):
    if k < need:
        raise InsufficientHistory(f"iteration {k} has fewer than {need} steps of history")
    if k >= len(trace):
        raise InsufficientHistory(f"trace has only {len(trace)} records, asked for k={k}")


def bicgql_anorm(trace, k: int, d1: int, signed: bool = False) -> float:
    """Estimate of ``||eps_{k-d1}||_A^2`` from iterations ``k-d1 .. k``.

    A lower bound when A is symmetric positive definite. For indefinite
    problems the sum may be negative; its absolute value is returned
    unless ``signed`` is set.
    """
    _check_k(trace, k, d1)
    s = 0.0
    for rec in trace.records[k - d1: k + 1]:
        s += rec.step_coeff * rec.res_norm_sq
    return s if signed else abs(s)


def l2_decrement(anorm_sq, step_term, mu, variant="consistent") -> float:
    """Estimated ``||eps_j||^2 - ||eps_{j+1}||^2``.

    ``anorm_sq`` is (an estimate of) ``||eps_j||_A^2``, ``step_term`` is
    ``alpha_j ||r_j||^2`` and ``mu`` the Rayleigh quotient of ``p_j``.
    The consistent form ``(2 g - alpha ||r||^2) / mu`` telescopes exactly
    on CG; the ``paper`` form ``2 g / (mu + alpha ||r||^2)`` does not.
    """
    variant = Variant(variant)
    if variant is Variant.CONSISTENT:
        if not math.isfinite(mu) or abs(mu) <= MU_TINY:
            raise ZeroDirection(f"Rayleigh quotient of the search direction vanished (mu={mu!r})")
        return (2.0 * anorm_sq - step_term) / mu
    den = mu + step_term
    if not math.isfinite(den) or abs(den) <= MU_TINY:
        raise ZeroDirection(f"denominator mu + alpha||r||^2 vanished ({den!r})")
    return 2.0 * anorm_sq / den


def bicgql_l2norm(trace, k: int, d1: int, d2: int, variant="consistent", signed: bool = False) -> float:
    """Estimate of ``||eps_{k-d1-d2}||^2`` at iteration ``k``.

    Sums :func:`l2_decrement` over ``j = k-d1-d2 .. k-d1``, each using the
    delayed A-norm estimate of ``eps_j``.
    """
    _check_k(trace, k, d1 + d2)
    total = 0.0
    for j in range(k - d1 - d2, k - d1 + 1):
        g = bicgql_anorm(trace, j + d1, d1, signed=True)
        rec = trace.records[j]
        total += l2_decrement(g, rec.step_coeff * rec.res_norm_sq, rec.mu_p, variant)
    return total if signed else abs(total)


def _default_direction(trace, hpd):
    if hpd is None:
        hpd = trace.method == "CG"
    return BoundDirection.LOWER if hpd else BoundDirection.HEURISTIC


def anorm_series(trace, d1: int = 0, signed: bool = False, hpd=None) -> EstimateSeries:
    """All available :func:`bicgql_anorm` values, keyed by target iterate."""
    out = EstimateSeries("BiCGQL_Anorm", d1=d1, bound_direction=_default_direction(trace, hpd))
    for k in range(d1, len(trace)):
        out.values[k - d1] = bicgql_anorm(trace, k, d1, signed)
    return out


def l2_series(trace, d1: int = 0, d2: int = 0, variant="consistent", signed: bool = False,
              hpd=None) -> EstimateSeries:
    K = len(trace)
    if hpd is None:
        hpd = trace.method == "CG"
    direction = BoundDirection.LOWER if hpd and Variant(variant) is Variant.CONSISTENT else BoundDirection.HEURISTIC
    out = EstimateSeries("BiCGQL_L2", d1=d1, d2=d2, bound_direction=direction)
    for k in range(d1 + d2, K):
        out.values[k - d1 - d2] = bicgql_l2norm(trace, k, d1, d2, variant, signed)
    return out


def residual_criterion(trace, b_norm: float, k: int) -> float:
    """``||r_k|| / ||b||``; ``k == len(trace)`` gives the final residual."""
    if k == len(trace):
        rr = trace.final_res_norm_sq
    elif 0 <= k < len(trace):
        rr = trace.records[k].res_norm_sq
    else:
        raise InsufficientHistory(f"k={k} outside 0..{len(trace)}")
    return math.sqrt(rr) / b_norm


def residual_series(trace, b_norm: float | None = None) -> EstimateSeries:
    b_norm = trace.b_norm if b_norm is None else b_norm
    out = EstimateSeries("Residual", bound_direction=BoundDirection.HEURISTIC)
    for k in range(len(trace) + (trace.termination is not None)):
        out.values[k] = residual_criterion(trace, b_norm, k)
    return out


# -- CGQL ---------------------------------------------------------------------

def _cgql_pass(trace, spectrum: SpectrumBounds, upto: int):
    """Run the CGQL recurrences over records ``0 .. upto``.

    Returns per-record arrays: the Gauss term ``c_{j+1}^2/delta_{j+1}``
    (so that ``sum_{i<m} gauss[i] = (T_m^{-1})_{11}``) and the extra
    contribution that the Radau (node at lambda_min or lambda_max) and
    Lobatto rules add on top of ``(T_{j+1}^{-1})_{11}``.
    """
    a = spectrum.lambda_min_est * (1.0 - SPECTRUM_SLACK)
    b = spectrum.lambda_max_est * (1.0 + SPECTRUM_SLACK)
    gammas = trace.step_coeffs[: upto + 1]
    betas = trace.betas[: upto + 1]
    n = len(gammas)
    gauss = np.empty(n)
    ex_ra = np.zeros(n)  # node at lambda_min: upper bound
    ex_rb = np.zeros(n)  # node at lambda_max: lower bound
    ex_lo = np.zeros(n)

    alpha_prev_gamma, beta_prev = 1.0, 0.0  # gamma_{-1}, beta_0
    eta2_prev = 0.0
    delta = dbar = dund = 1.0
    c2 = 1.0
    for j in range(n):
        # Jacobi entries of row j+1 and eta_{j+1}
        alpha = 1.0 / gammas[j] + beta_prev / alpha_prev_gamma
        eta2 = betas[j] / gammas[j] ** 2
        if j == 0:
            delta, dbar, dund = alpha, alpha - a, alpha - b
        else:
            delta = alpha - eta2_prev / delta
            dbar = alpha - a - eta2_prev / dbar
            dund = alpha - b - eta2_prev / dund
        if not dbar > 0:
            raise SpectrumViolation(f"lambda_min estimate {a!r} is not below the Ritz values at step {j + 1}")
        if not dund < 0:
            raise SpectrumViolation(f"lambda_max estimate {b!r} is not above the Ritz values at step {j + 1}")
        gauss[j] = c2 / delta
        # numerically invariant Krylov space: every rule is exact
        if eta2 > (INVARIANT_RTOL * alpha) ** 2:
            om_a = a + eta2 / dbar
            om_b = b + eta2 / dund
            ex_ra[j] = eta2 * c2 / (delta * (om_a * delta - eta2))
            ex_rb[j] = eta2 * c2 / (delta * (om_b * delta - eta2))
            eta2_lo = (b - a) * dbar * dund / (dund - dbar)
            om_lo = a + eta2_lo / dbar
            ex_lo[j] = eta2_lo * c2 / (delta * (om_lo * delta - eta2_lo))
        c2 = eta2 * c2 / delta**2
        eta2_prev = eta2
        alpha_prev_gamma, beta_prev = gammas[j], betas[j]
    return gauss, ex_ra, ex_rb, ex_lo


def cgql_bounds(trace, spectrum: SpectrumBounds, k: int, d: int) -> CGQLBounds:
    """Gauss, Gauss-Radau and Gauss-Lobatto estimates of ``||eps_{k-d}||_A^2``.

    For SPD A with ``lambda_min_est <= lambda_min(A)`` and
    ``lambda_max_est >= lambda_max(A)``: ``gauss <= radau_lower <= true``
    and ``true <= radau_upper``, ``true <= lobatto``. The Gauss value
    coincides with ``bicgql_anorm(trace, k, d)``.
    """
    _check_k(trace, k, d)
    gauss, ex_ra, ex_rb, ex_lo = _cgql_pass(trace, spectrum, k)
    return _cgql_at(trace.r0_norm_sq, gauss, ex_ra, ex_rb, ex_lo, k, d)


def _cgql_at(r0sq, gauss, ex_ra, ex_rb, ex_lo, k, d):
    g = float(np.sum(gauss[k - d: k + 1]))
    return CGQLBounds(
        gauss=r0sq * g,
        radau_lower=float(r0sq * (g + ex_rb[k])),
        radau_upper=float(r0sq * (g + ex_ra[k])),
        lobatto=float(r0sq * (g + ex_lo[k])),
    )


def cgql_series(trace, spectrum: SpectrumBounds, d: int = 0) -> dict:
    """CGQL estimates for every target iterate, one series per rule."""
    K = len(trace)
    names = {
        "gauss": ("CGQL_Gauss", BoundDirection.LOWER),
        "radau_lower": ("CGQL_Radau_Lower", BoundDirection.LOWER),
        "radau_upper": ("CGQL_Radau", BoundDirection.UPPER),
        "lobatto": ("CGQL_Lobatto", BoundDirection.UPPER),
    }
    out = {key: EstimateSeries(kind, d1=d, bound_direction=bd) for key, (kind, bd) in names.items()}
    if K <= d:
        return out
    parts = _cgql_pass(trace, spectrum, K - 1)
    for k in range(d, K):
        est = _cgql_at(trace.r0_norm_sq, *parts, k, d)
        for key in out:
            out[key].values[k - d] = getattr(est, key)
    return out


# -- Golub-Meurant one-shot estimates -----------------------------------------

def golub_meurant(A, r):
    """One-shot estimates ``(anorm_est, l2_est)`` of ``r^T A^{-1} r`` and ``r^T A^{-2} r``.

    ``anorm_est = (r, A r)^2 / (A^2 r, A r)`` and
    ``l2_est = (r, r)^2 / (A r, A r)``. Both are exact when A is a
    multiple of the identity. Costs two operator applications.
    """
    op = as_operator(A)
    r = np.asarray(r, dtype=float)
    if not np.any(r):
        raise ZeroDenominator("residual is zero")
    Ar = op.apply(r)
    A2r = op.apply(Ar)
    den_a = float(A2r @ Ar)
    den_2 = float(Ar @ Ar)
    if den_a == 0.0 or den_2 == 0.0:
        raise ZeroDenominator("Golub-Meurant denominator vanished")
    rAr = float(r @ Ar)
    rr = float(r @ r)
    return rAr**2 / den_a, rr**2 / den_2
