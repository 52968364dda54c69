import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicgql.lanczos import (
    JacobiMatrix,
    NonPositiveBeta,
    SeriousBreakdown,
    jacobi_from_cg,
    jacobi_from_trace,
    nonsym_lanczos,
    starting_vectors,
    sym_lanczos,
    t_inv_11,
)
from bicgql.linalg import quadratic_form_inverse
from bicgql.matgen import NONSYM, GenSpec, gen_matrix
from bicgql.solvers import StoppingCriterion, cg_solve

from conftest import hpd, rhs


def test_sym_lanczos_identity():
    basis, T = sym_lanczos(np.eye(4), np.ones(4) / 2, 3)
    assert basis.breakdown == "lucky" and basis.size == 1
    np.testing.assert_array_equal(T.diag, [1.0])


def test_sym_lanczos_diag12():
    _, T = sym_lanczos(np.diag([1.0, 2.0]), np.array([1.0, 1.0]) / np.sqrt(2), 2)
    np.testing.assert_allclose(T.dense(), [[1.5, 0.5], [0.5, 1.5]], atol=1e-15)
    np.testing.assert_allclose(T.eigvals(), [1.0, 2.0], atol=1e-14)


def test_sym_lanczos_full_spectrum():
    rng = np.random.default_rng(0)
    lam = np.linspace(1.0, 4.0, 30)
    q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    a = (q * lam) @ q.T
    basis, T = sym_lanczos(0.5 * (a + a.T), rng.standard_normal(30), 30)
    np.testing.assert_allclose(T.eigvals(), lam, atol=1e-6)
    np.testing.assert_allclose(basis.V.T @ basis.V, np.eye(30), atol=1e-6)


def test_sym_lanczos_relation():
    A = hpd(40, 100.0, seed=1)
    basis, T = sym_lanczos(A, rhs(40), 10)
    lhs = A.entries @ basis.V
    rhs_ = basis.V @ T.dense()
    rhs_[:, -1] += basis.next_coeff * basis.v_next
    np.testing.assert_allclose(lhs, rhs_, atol=1e-12)


def test_sym_lanczos_argument_checks():
    with pytest.raises(ValueError):
        sym_lanczos(np.eye(3), np.zeros(3), 2)
    with pytest.raises(ValueError):
        sym_lanczos(np.eye(3), np.ones(3), 4)


def test_starting_vectors():
    v1, vt1 = starting_vectors([3.0, 4.0])
    assert np.linalg.norm(v1) == pytest.approx(1.0)
    assert v1 @ vt1 == pytest.approx(1.0)


def test_nonsym_reduces_to_sym():
    A = hpd(25, 50.0, seed=2)
    v1, vt1 = starting_vectors(rhs(25, 2))
    _, Ts = sym_lanczos(A, v1, 8)
    _, Tn = nonsym_lanczos(A, v1, vt1, 8)
    np.testing.assert_allclose(Tn.diag, Ts.diag, rtol=1e-12)
    np.testing.assert_allclose(Tn.sup, Ts.sup, rtol=1e-12)
    np.testing.assert_allclose(Tn.sub, Ts.sub, rtol=1e-12)


def test_nonsym_identity():
    v1, vt1 = starting_vectors(np.ones(3))
    basis, T = nonsym_lanczos(np.eye(3), v1, vt1, 3)
    assert basis.breakdown == "lucky"
    np.testing.assert_array_equal(T.diag, [1.0])


def test_nonsym_biorthogonality():
    A = gen_matrix(GenSpec(20, 10.0, NONSYM, seed=3))
    v1, vt1 = starting_vectors(rhs(20, 3))
    basis, T = nonsym_lanczos(A, v1, vt1, 15)
    np.testing.assert_allclose(basis.Vtilde.T @ basis.V, np.eye(15), atol=1e-6)
    # the two-sided relation A V = V T + eta_t v_{k+1} e_k^T
    lhs = A.entries @ basis.V
    rhs_ = basis.V @ T.dense()
    rhs_[:, -1] += basis.next_coeff * basis.v_next
    np.testing.assert_allclose(lhs, rhs_, atol=1e-10)
    assert np.all(T.sub > 0)
    np.testing.assert_allclose(np.abs(T.sup), T.sub, rtol=1e-14)


def test_nonsym_serious_breakdown():
    A = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    e1 = np.array([1.0, 0.0, 0.0])
    with pytest.raises(SeriousBreakdown) as info:
        nonsym_lanczos(A, e1, e1, 3)
    assert info.value.basis.size == 1


def test_nonsym_checks_starting_vectors():
    with pytest.raises(ValueError):
        nonsym_lanczos(np.eye(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]), 2)


def test_jacobi_from_cg_examples():
    T = jacobi_from_cg([1.0], [])
    np.testing.assert_array_equal(T.dense(), [[1.0]])
    T = jacobi_from_cg([2 / 3, 3 / 4], [1 / 9])
    np.testing.assert_allclose(T.diag, [1.5, 1.5], rtol=1e-15)
    np.testing.assert_allclose(T.sup, [0.5], rtol=1e-15)


def test_jacobi_from_cg_diag12_trace(diag12):
    A, b = diag12
    _, tr = cg_solve(A, b)
    np.testing.assert_allclose(jacobi_from_trace(tr).dense(), [[1.5, 0.5], [0.5, 1.5]], atol=1e-12)


def test_jacobi_from_cg_matches_lanczos():
    A = hpd(30, 100.0, seed=4)
    b = rhs(30, 4)
    _, tr = cg_solve(A, b, max_iter=12)
    T = jacobi_from_trace(tr)
    _, L = sym_lanczos(A, b, 12)
    np.testing.assert_allclose(T.diag, L.diag, rtol=1e-8)
    np.testing.assert_allclose(T.sup, L.sup, rtol=1e-8)


def test_jacobi_errors():
    with pytest.raises(NonPositiveBeta):
        jacobi_from_cg([1.0, 1.0], [-0.5])
    with pytest.raises(ValueError):
        jacobi_from_cg([1.0], [0.1])
    with pytest.raises(ValueError):
        JacobiMatrix([1.0, 2.0], [1.0, 2.0], [1.0])


def test_t_inv_11_examples(diag12):
    A, b = diag12
    _, tr = cg_solve(A, b)
    assert t_inv_11(tr, 0) == 0.0
    assert t_inv_11(tr, 2) == pytest.approx(0.75, rel=1e-14)
    with pytest.raises(IndexError):
        t_inv_11(tr, 3)


@pytest.mark.parametrize("kappa", [10.0, 1e3, 1e4])
def test_t_inv_11_matches_tridiagonal_inverse(kappa):
    A = hpd(40, kappa, seed=5)
    _, tr = cg_solve(A, rhs(40, 5), max_iter=30)
    for k in range(1, len(tr) + 1):
        T = jacobi_from_trace(tr, k).dense()
        assert t_inv_11(tr, k) == pytest.approx(np.linalg.inv(T)[0, 0], rel=1e-8)


@pytest.mark.parametrize("kappa", [10.0, 1e2, 1e4])
def test_quadrature_identity_full_run(kappa):
    A = hpd(30, kappa, seed=6)
    b = rhs(30, 6)
    _, tr = cg_solve(A, b, criterion=StoppingCriterion("residual", 1e-14), max_iter=2000)
    full = tr.r0_norm_sq * t_inv_11(tr, len(tr))
    assert full == pytest.approx(quadratic_form_inverse(A, b), rel=1e-6)


def test_gauss_rule_splitting():
    A = hpd(30, 1e3, seed=7)
    b = rhs(30, 7)
    _, tr = cg_solve(A, b, criterion=StoppingCriterion("residual", 1e-14), max_iter=2000, store_iterates=True)
    K = len(tr)
    total = t_inv_11(tr, K)
    for k in range(0, K, 5):
        rk = b - A.apply(tr.iterates[k])
        expected = quadratic_form_inverse(A, rk) / tr.r0_norm_sq
        assert total - t_inv_11(tr, k) == pytest.approx(expected, rel=1e-6, abs=1e-12 * total)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([5.0, 1e2, 1e3]), st.integers(1, 10))
def test_ritz_values_inside_spectrum(seed, kappa, k):
    A = hpd(15, kappa, seed=seed)
    _, tr = cg_solve(A, rhs(15, seed), max_iter=k)
    ev = jacobi_from_trace(tr).eigvals()
    assert ev.min() >= 1.0 - 1e-8 and ev.max() <= kappa * (1 + 1e-8)
