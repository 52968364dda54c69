import numpy as np
import pytest

from bicgql.linalg import Operator, direct_solve
from bicgql.matgen import HPD, GenSpec, gen_matrix


def hpd(n, kappa, seed=0):
    return gen_matrix(GenSpec(n, kappa, HPD, seed=seed))


def true_errors(A, b, trace):
    """Squared A-norm and l2-norm of the error of every stored iterate."""
    op = A if isinstance(A, Operator) else Operator(A)
    x = direct_solve(op, b)
    E = x - trace.iterates
    M = op.entries
    return np.einsum("ij,jk,ik->i", E, M, E), np.einsum("ij,ij->i", E, E)


def rhs(n, seed=0):
    return np.random.default_rng(seed).standard_normal(n)


@pytest.fixture
def diag12():
    return Operator(np.diag([1.0, 2.0])), np.array([1.0, 1.0])


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
