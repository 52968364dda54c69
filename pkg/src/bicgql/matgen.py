"""Seeded test matrices with a prescribed 2-norm condition number."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Operator

__all__ = ["HPD", "NONSYM", "GenSpec", "CaseSet", "haar_orthogonal", "log_spectrum", "gen_matrix", "gen_rhs_suite"]

HPD = "HPD"
NONSYM = "NonsymmetricIndefinite"
CLASSES = (HPD, NONSYM)


@dataclass(frozen=True)
class GenSpec:
    dim: int
    kappa: float
    klass: str = HPD
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not (np.isfinite(self.kappa) and self.kappa >= 1):
            raise ValueError("kappa must be finite and >= 1")
        if self.klass not in CLASSES:
            raise ValueError(f"klass must be one of {CLASSES}")


@dataclass(frozen=True)
class CaseSet:
    matrix: Operator
    rhs_list: list


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with diag(R) > 0."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def log_spectrum(n: int, kappa: float) -> np.ndarray:
    """``n`` values log-spaced on ``[1, kappa]``, ascending."""
    return np.logspace(0.0, np.log10(kappa), n)


def gen_matrix(spec: GenSpec) -> Operator:
    """Matrix of class ``spec.klass`` with ``cond_2 = spec.kappa``.

    HPD: ``Q diag(s) Q^T`` with Haar Q. Non-symmetric: ``U S diag(s) V^T``
    with independent Haar U, V and a seeded sign flip ``S`` on half the
    singular triplets. ``kappa == 1`` in the HPD class gives exactly I.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.dim
    s = log_spectrum(n, spec.kappa)
    if spec.klass == HPD:
        if spec.kappa == 1:
            return Operator(np.eye(n))
        q = haar_orthogonal(n, rng)
        a = (q * s) @ q.T
        return Operator(0.5 * (a + a.T))
    u = haar_orthogonal(n, rng)
    v = haar_orthogonal(n, rng)
    signs = np.ones(n)
    signs[rng.permutation(n)[: n // 2]] = -1.0
    return Operator((u * (signs * s)) @ v.T)


def gen_rhs_suite(dim: int, count: int, seed: int = 0) -> list:
    """``count`` distinct canonical basis vectors, order drawn by a seeded shuffle."""
    if count > dim:
        raise ValueError(f"cannot draw {count} distinct canonical vectors of length {dim}")
    if count < 0:
        raise ValueError("count must be non-negative")
    idx = np.random.default_rng(seed).permutation(dim)[:count]
    eye = np.eye(dim)
    return [eye[i].copy() for i in idx]
