"""Dense operators, a pivoted-LU oracle and Matrix Market I/O.

Solvers only ever touch a matrix through :class:`Operator`, which keeps
the number of operator applications observable (see
:class:`CountingOperator`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse

__all__ = [
    "Operator",
    "CountingOperator",
    "DirectFactorization",
    "SingularMatrix",
    "as_operator",
    "mat_vec",
    "lu_factor",
    "direct_solve",
    "quadratic_form_inverse",
    "read_matrix",
    "write_matrix",
    "read_vector",
    "write_vector",
]

# pivot tolerance relative to the infinity norm of A
PIVOT_RTOL = 1e-14


class SingularMatrix(ValueError):
    """A pivot of the LU factorization fell below the singularity tolerance."""


class Operator:
    """Square real matrix exposing ``apply`` and ``apply_transpose``.

    The entries are copied and frozen on construction.
    """

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"operator must be a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator entries must be finite")
        a.setflags(write=False)
        self._a = a
        # exact symmetry: use the same product for A^T x so that shadow
        # sequences stay bitwise equal to the primal ones
        self._exact_symmetric = bool(np.array_equal(a, a.T))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._a

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: operator has dim {self.dim}, vector has shape {x.shape}")
        return x

    def apply(self, x) -> np.ndarray:
        return self._a @ self._check(x)

    def apply_transpose(self, x) -> np.ndarray:
        if self._exact_symmetric:
            return self._a @ self._check(x)
        return self._a.T @ self._check(x)

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        a = self._a
        scale = np.linalg.norm(a)
        return bool(np.linalg.norm(a - a.T) <= rtol * max(scale, np.finfo(float).tiny))

    def __repr__(self):
        return f"Operator(dim={self.dim})"


class CountingOperator(Operator):
    """Operator that counts how many times it has been applied."""

    def __init__(self, entries):
        if isinstance(entries, Operator):
            entries = entries.entries
        super().__init__(entries)
        self.n_apply = 0
        self.n_apply_transpose = 0

    @property
    def n_total(self) -> int:
        return self.n_apply + self.n_apply_transpose

    def reset(self):
        self.n_apply = 0
        self.n_apply_transpose = 0

    def apply(self, x):
        self.n_apply += 1
        return super().apply(x)

    def apply_transpose(self, x):
        self.n_apply_transpose += 1
        return super().apply_transpose(x)


def as_operator(a) -> Operator:
    if isinstance(a, Operator):
        return a
    return Operator(a)


def mat_vec(A, x) -> np.ndarray:
    return as_operator(A).apply(x)


@dataclass(frozen=True)
class DirectFactorization:
    """Row-pivoted LU factors ``P A = L U`` of an operator.

    ``lu`` and ``piv`` are in LAPACK ``getrf`` layout. ``singular`` is set
    when some pivot of U is below ``1e-14 * ||A||_inf``.
    """

    lu: np.ndarray
    piv: np.ndarray
    singular: bool
    min_pivot: float

    @property
    def dim(self) -> int:
        return self.lu.shape[0]

    def factors(self):
        """Return ``(P, L, U)`` with ``P @ A == L @ U``."""
        n = self.dim
        L = np.tril(self.lu, -1) + np.eye(n)
        U = np.triu(self.lu)
        perm = np.arange(n)
        for i, p in enumerate(self.piv):
            perm[i], perm[p] = perm[p], perm[i]
        P = np.eye(n)[perm]
        return P, L, U

    def solve(self, b, trans: bool = False) -> np.ndarray:
        if self.singular:
            raise SingularMatrix(f"matrix is singular to working precision (min pivot {self.min_pivot:.3e})")
        return scipy.linalg.lu_solve((self.lu, self.piv), np.asarray(b, dtype=np.float64), trans=1 if trans else 0)


def lu_factor(A) -> DirectFactorization:
    a = as_operator(A).entries
    lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    tol = PIVOT_RTOL * np.linalg.norm(a, np.inf)
    min_pivot = float(pivots.min())
    return DirectFactorization(lu=lu, piv=piv, singular=bool(min_pivot <= tol), min_pivot=min_pivot)


def direct_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by partial-pivoting LU.

    Raises
    ------
    SingularMatrix
        If a pivot magnitude is at or below ``1e-14 * ||A||_inf``.
    """
    op = as_operator(A)
    b = op._check(b)
    return lu_factor(op).solve(b)


def quadratic_form_inverse(A, r) -> float:
    """Return ``r^T A^{-1} r`` (the squared A-norm of the error whose residual is r)."""
    r = np.asarray(r, dtype=np.float64)
    return float(r @ direct_solve(A, r))


# -- Matrix Market ----------------------------------------------------------

def read_matrix(path) -> Operator:
    m = scipy.io.mmread(str(path))
    if hasattr(m, "toarray"):
        m = m.toarray()
    return Operator(np.asarray(m, dtype=np.float64))


def write_matrix(path, A, field: str = "real", fmt: str = "array"):
    """Write ``A`` as Matrix Market ``array`` (dense) or ``coordinate`` format."""
    a = as_operator(A).entries
    if fmt == "coordinate":
        a = scipy.sparse.coo_matrix(a)
    elif fmt != "array":
        raise ValueError(f"unknown Matrix Market format {fmt!r}")
    scipy.io.mmwrite(str(path), a, field=field, precision=17)


def read_vector(path) -> np.ndarray:
    v = scipy.io.mmread(str(path))
    if hasattr(v, "toarray"):
        v = v.toarray()
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 1:
        raise ValueError(f"expected a one-column Matrix Market array, got shape {v.shape}")
    return v[:, 0]


def write_vector(path, v):
    v = np.asarray(v, dtype=np.float64).reshape(-1, 1)
    scipy.io.mmwrite(str(path), v, field="real", precision=17)
