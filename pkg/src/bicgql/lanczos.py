"""Symmetric and two-sided Lanczos, and Jacobi matrices built from CG.

No reorthogonalization is done anywhere; at large condition numbers the
bases lose orthogonality exactly as the plain recurrences do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_operator

__all__ = [
    "JacobiMatrix",
    "LanczosBasis",
    "SeriousBreakdown",
    "NonPositiveBeta",
    "sym_lanczos",
    "nonsym_lanczos",
    "starting_vectors",
    "jacobi_from_cg",
    "jacobi_from_trace",
    "t_inv_11",
]

LUCKY_RTOL = 1e-12
SERIOUS_RTOL = 1e-13


class SeriousBreakdown(ArithmeticError):
    """(z_k, w_k) vanished although neither vector did."""

    def __init__(self, message, basis=None, jacobi=None):
        super().__init__(message)
        self.basis = basis
        self.jacobi = jacobi


class NonPositiveBeta(ValueError):
    pass


@dataclass(frozen=True)
class JacobiMatrix:
    """Tridiagonal matrix stored as diagonal, super- and sub-diagonal.

    In the symmetric case ``sup`` and ``sub`` are the same array.
    """

    diag: np.ndarray
    sup: np.ndarray
    sub: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diag", np.asarray(self.diag, dtype=float))
        object.__setattr__(self, "sup", np.asarray(self.sup, dtype=float))
        object.__setattr__(self, "sub", np.asarray(self.sub, dtype=float))
        m = len(self.diag)
        if len(self.sup) != max(m - 1, 0) or len(self.sub) != max(m - 1, 0):
            raise ValueError("off-diagonals must have length len(diag) - 1")

    @classmethod
    def symmetric(cls, diag, off):
        off = np.asarray(off, dtype=float)
        return cls(diag, off, off)

    @property
    def size(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sup, 1) + np.diag(self.sub, -1)

    def eigvals(self) -> np.ndarray:
        return np.sort(np.linalg.eigvals(self.dense()).real)

    def leading(self, k: int) -> "JacobiMatrix":
        return JacobiMatrix(self.diag[:k], self.sup[: max(k - 1, 0)], self.sub[: max(k - 1, 0)])


@dataclass(frozen=True)
class LanczosBasis:
    """Columns of ``V`` (and ``Vtilde`` for the two-sided process).

    ``next_coeff`` is the coefficient multiplying the next basis vector in
    ``A V_k = V_k T_k + next_coeff * v_{k+1} e_k^T``; ``v_next`` is that
    vector (None after a lucky breakdown). ``breakdown`` is ``"lucky"``
    when an invariant subspace was found.
    """

    V: np.ndarray
    Vtilde: np.ndarray | None
    next_coeff: float
    v_next: np.ndarray | None
    vtilde_next: np.ndarray | None = None
    breakdown: str | None = None

    @property
    def size(self) -> int:
        return self.V.shape[1]


def sym_lanczos(A, v, k: int):
    """Lanczos tridiagonalization of a symmetric operator (modified Gram-Schmidt form).

    Returns ``(basis, jacobi)``. If the new direction vanishes before ``k``
    steps the shorter basis is returned with ``breakdown="lucky"``.
    """
    op = as_operator(A)
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("starting vector must be non-zero")
    if not 1 <= k <= op.dim:
        raise ValueError(f"k must be in [1, {op.dim}]")

    V = [v / nv]
    alphas, betas = [], []
    v_prev = np.zeros_like(v)
    beta_prev = 0.0
    breakdown = None
    for j in range(k):
        Av = op.apply(V[j])
        w = Av - beta_prev * v_prev
        a = float(V[j] @ w)
        w = w - a * V[j]
        b = float(np.linalg.norm(w))
        alphas.append(a)
        scale = max(abs(a), beta_prev, float(np.linalg.norm(Av)))
        if b <= LUCKY_RTOL * scale:
            breakdown = "lucky"
            betas.append(0.0)
            break
        betas.append(b)
        v_prev, beta_prev = V[j], b
        V.append(w / b)

    m = len(alphas)
    basis = LanczosBasis(
        V=np.column_stack(V[:m]),
        Vtilde=None,
        next_coeff=betas[-1],
        v_next=None if breakdown else V[m],
        breakdown=breakdown,
    )
    return basis, JacobiMatrix.symmetric(alphas, betas[: m - 1])


def starting_vectors(r0):
    """``v1 = r0/||r0||`` and a shadow ``vt1`` with ``(v1, vt1) = 1``."""
    r0 = np.asarray(r0, dtype=float)
    v1 = r0 / np.linalg.norm(r0)
    return v1, v1 / float(v1 @ v1)


def nonsym_lanczos(A, v1, vtilde1, k: int):
    """Two-sided (non-symmetric) Lanczos process.

    ``(z_k, w_k)`` is split as ``sub = sqrt|(z,w)|`` and ``sup = (z,w)/sub``,
    so the sign lives on the super-diagonal. Raises :class:`SeriousBreakdown`
    when ``|(z,w)| <= 1e-13 ||z|| ||w||``; a vanishing ``z`` or ``w`` is a
    lucky breakdown and returns the shorter basis.
    """
    op = as_operator(A)
    v1 = np.asarray(v1, dtype=float)
    vt1 = np.asarray(vtilde1, dtype=float)
    if abs(np.linalg.norm(v1) - 1.0) > 1e-10 or abs(float(v1 @ vt1) - 1.0) > 1e-10:
        raise ValueError("starting vectors must satisfy ||v1|| = 1 and (v1, vtilde1) = 1")
    if not 1 <= k <= op.dim:
        raise ValueError(f"k must be in [1, {op.dim}]")

    V, Vt = [v1], [vt1]
    omegas, etas, etas_t = [], [], []
    v_prev = np.zeros_like(v1)
    vt_prev = np.zeros_like(vt1)
    eta_prev = eta_t_prev = 0.0
    breakdown = None
    for j in range(k):
        Av = op.apply(V[j])
        Atv = op.apply_transpose(Vt[j])
        om = float(Vt[j] @ Av)
        z = Av - om * V[j] - eta_prev * v_prev
        w = Atv - om * Vt[j] - eta_t_prev * vt_prev
        omegas.append(om)
        nz, nw = float(np.linalg.norm(z)), float(np.linalg.norm(w))
        scale = max(abs(om), float(np.linalg.norm(Av)), float(np.linalg.norm(Atv)))
        if nz <= LUCKY_RTOL * scale or nw <= LUCKY_RTOL * scale:
            breakdown = "lucky"
            etas.append(0.0)
            etas_t.append(0.0)
            break
        zw = float(z @ w)
        if abs(zw) <= SERIOUS_RTOL * nz * nw:
            m = len(omegas)
            basis = LanczosBasis(np.column_stack(V[:m]), np.column_stack(Vt[:m]), 0.0, None)
            jac = JacobiMatrix(omegas, etas[: m - 1], etas_t[: m - 1])
            raise SeriousBreakdown(f"(z, w) = {zw:.3e} vanished at step {j + 1}", basis, jac)
        eta_t = math.sqrt(abs(zw))
        eta = zw / eta_t
        etas.append(eta)
        etas_t.append(eta_t)
        v_prev, vt_prev = V[j], Vt[j]
        eta_prev, eta_t_prev = eta, eta_t
        V.append(z / eta_t)
        Vt.append(w / eta)

    m = len(omegas)
    basis = LanczosBasis(
        V=np.column_stack(V[:m]),
        Vtilde=np.column_stack(Vt[:m]),
        next_coeff=etas_t[-1],
        v_next=None if breakdown else V[m],
        vtilde_next=None if breakdown else Vt[m],
        breakdown=breakdown,
    )
    return basis, JacobiMatrix(omegas, etas[: m - 1], etas_t[: m - 1])


def jacobi_from_cg(gammas, betas) -> JacobiMatrix:
    """Jacobi matrix T_k from CG step lengths gamma_0..gamma_{k-1} and beta_1..beta_{k-1}.

    Uses ``alpha_j = 1/gamma_{j-1} + beta_{j-1}/gamma_{j-2}`` and
    ``eta_j = sqrt(beta_j)/gamma_{j-1}`` with ``beta_0 = 0``, ``gamma_{-1} = 1``.
    """
    gammas = np.asarray(gammas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if len(gammas) == 0:
        raise ValueError("need at least one step length")
    if len(betas) != len(gammas) - 1:
        raise ValueError("len(betas) must equal len(gammas) - 1")
    if np.any(betas < 0):
        raise NonPositiveBeta(f"negative beta encountered: {betas[betas < 0][0]:.3e}")
    diag = 1.0 / gammas
    diag[1:] += betas / gammas[:-1]
    off = np.sqrt(betas) / gammas[:-1]
    return JacobiMatrix.symmetric(diag, off)


def jacobi_from_trace(trace, k: int | None = None) -> JacobiMatrix:
    """T_k from the first ``k`` records of a CG (or symmetric BiCG) trace."""
    k = len(trace) if k is None else k
    if not 1 <= k <= len(trace):
        raise IndexError(f"k={k} outside 1..{len(trace)}")
    return jacobi_from_cg(trace.step_coeffs[:k], trace.betas[: k - 1])


def t_inv_11(trace, k: int) -> float:
    """(T_k^{-1})_{1,1} as ``sum_{j<k} alpha_j ||r_j||^2 / ||r_0||^2``."""
    if not 0 <= k <= len(trace):
        raise IndexError(f"k={k} outside 0..{len(trace)}")
    if k == 0:
        return 0.0
    terms = trace.step_coeffs[:k] * trace.res_norm_sqs[:k]
    return float(np.sum(terms) / trace.r0_norm_sq)
