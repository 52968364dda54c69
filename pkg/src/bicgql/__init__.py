"""BiCG/CG solvers with online A-norm and l2-norm error estimators."""

from .estimators import (
    EstimateSeries,
    SpectrumBounds,
    bicgql_anorm,
    bicgql_l2norm,
    cgql_bounds,
    golub_meurant,
    residual_criterion,
)
from .lanczos import JacobiMatrix, jacobi_from_cg, nonsym_lanczos, sym_lanczos, t_inv_11
from .linalg import CountingOperator, Operator, SingularMatrix, direct_solve, mat_vec, quadratic_form_inverse
from .solvers import SolveTrace, StoppingCriterion, Termination, bicg_solve, bicgstab_solve, cg_solve

__version__ = "0.1.0"
