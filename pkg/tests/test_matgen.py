import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicgql.matgen import HPD, NONSYM, GenSpec, gen_matrix, gen_rhs_suite, haar_orthogonal, log_spectrum


def test_kappa_one_is_identity():
    np.testing.assert_array_equal(gen_matrix(GenSpec(3, 1.0)).entries, np.eye(3))


@pytest.mark.parametrize("klass", [HPD, NONSYM])
@pytest.mark.parametrize("kappa", [10.0, 1e4, 1e6])
def test_condition_number(klass, kappa):
    a = gen_matrix(GenSpec(100, kappa, klass, seed=1)).entries
    assert np.linalg.cond(a) == pytest.approx(kappa, rel=1e-2)


def test_hpd_properties():
    a = gen_matrix(GenSpec(50, 1e5, seed=2)).entries
    assert np.linalg.norm(a - a.T) <= 1e-12 * np.linalg.norm(a)
    np.linalg.cholesky(a)


def test_nonsymmetric_indefinite():
    a = gen_matrix(GenSpec(100, 1e3, NONSYM, seed=3)).entries
    assert np.linalg.norm(a - a.T) > 0
    ev = np.linalg.eigvalsh(0.5 * (a + a.T))
    assert ev[0] < 0 < ev[-1]


def test_reproducible():
    s = GenSpec(30, 1e3, NONSYM, seed=4)
    np.testing.assert_array_equal(gen_matrix(s).entries, gen_matrix(s).entries)
    assert not np.array_equal(gen_matrix(s).entries, gen_matrix(GenSpec(30, 1e3, NONSYM, seed=5)).entries)


def test_haar_orthogonal():
    q = haar_orthogonal(20, np.random.default_rng(0))
    np.testing.assert_allclose(q.T @ q, np.eye(20), atol=1e-13)


def test_log_spectrum():
    s = log_spectrum(4, 1e3)
    np.testing.assert_allclose(s, [1.0, 10.0, 100.0, 1000.0], rtol=1e-14)


@pytest.mark.parametrize("kw", [dict(dim=1, kappa=2.0), dict(dim=5, kappa=0.5), dict(dim=5, kappa=2.0, klass="x")])
def test_genspec_validation(kw):
    with pytest.raises(ValueError):
        GenSpec(**kw)


def test_rhs_exhaustive():
    vs = gen_rhs_suite(3, 3, seed=0)
    np.testing.assert_array_equal(np.sort(np.array(vs), axis=0)[::-1].sum(axis=0), np.ones(3))
    np.testing.assert_array_equal(np.abs(np.linalg.det(np.array(vs))), 1.0)


def test_rhs_full_100():
    vs = np.array(gen_rhs_suite(100, 100, seed=9))
    np.testing.assert_array_equal(vs.sum(axis=0), np.ones(100))
    np.testing.assert_array_equal(vs.sum(axis=1), np.ones(100))


def test_rhs_errors():
    with pytest.raises(ValueError):
        gen_rhs_suite(3, 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32 - 1), st.data())
def test_rhs_deterministic_and_distinct(dim, seed, data):
    count = data.draw(st.integers(0, dim))
    a = gen_rhs_suite(dim, count, seed)
    b = gen_rhs_suite(dim, count, seed)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    idx = [int(np.argmax(v)) for v in a]
    assert len(set(idx)) == count
    assert all(v.sum() == 1.0 and np.count_nonzero(v) == 1 for v in a)
