"""Riemannian proximal quasi-Newton (ManPQN) and proximal-gradient baselines
for min f(X) + mu ||X||_1 over the Stiefel manifold."""

from .driver import (
    ALGORITHMS,
    RunTrace,
    SolverConfig,
    manpg_solve,
    manpqn_solve,
    solve,
)
from .errors import (
    DimensionError,
    MatrixMarketError,
    MetricError,
    NumericalAbort,
    RetractionError,
)
from .mmio import SparseMatrix, load_matrix_market, parse_matrix_market, write_matrix_market
from .problems import (
    ProblemSpec,
    cm_problem,
    gen_jointdiag_random,
    gen_spca_random,
    jointdiag_problem,
    spca_problem,
)
from .qn import DiagonalMetric, QnMemory
from .stiefel import project_tangent, random_stiefel, retract, riemannian_gradient

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "RunTrace", "SolverConfig", "manpg_solve", "manpqn_solve", "solve",
    "DimensionError", "MatrixMarketError", "MetricError", "NumericalAbort", "RetractionError",
    "SparseMatrix", "load_matrix_market", "parse_matrix_market", "write_matrix_market",
    "ProblemSpec", "cm_problem", "gen_jointdiag_random", "gen_spca_random",
    "jointdiag_problem", "spca_problem", "DiagonalMetric", "QnMemory",
    "project_tangent", "random_stiefel", "retract", "riemannian_gradient",
]
