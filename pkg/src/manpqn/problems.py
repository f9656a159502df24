"""Benchmark objectives F(X) = f(X) + mu * ||X||_1 on St(n, r).

* compressed modes:      f(X) = tr(X^T H X), H a discretized 1-D Schrodinger operator
* sparse PCA:            f(X) = -tr(X^T A^T A X)
* joint diagonalization: f(X) = -sum_l ||diag(X^T A_l X)||^2
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError
from .mmio import SparseMatrix
from .stiefel import project_tangent, random_stiefel, sym

CM_DOMAIN_LENGTH = 50.0
DENSE_GRAM_LIMIT = 2000


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    n: int
    r: int
    mu: float
    f_value: Callable[[np.ndarray], float]
    f_grad: Callable[[np.ndarray], np.ndarray]
    lipschitz_hint: float | None = None
    info: dict = field(default_factory=dict, compare=False)

    def F(self, X) -> float:
        return self.f_value(X) + self.mu * float(np.abs(X).sum())


def power_iteration(matvec, n: int, tol: float = 1e-8, maxit: int = 10000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD operator given by ``matvec``."""
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxit):
        w = matvec(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


# -- compressed modes ---------------------------------------------------------

def cm_hamiltonian(n: int, length: float = CM_DOMAIN_LENGTH) -> sp.csr_matrix:
    """-1/2 times the periodic second-difference Laplacian on n points of [0, length]."""
    if n < 4:
        raise DimensionError(f"compressed modes needs n >= 4, got {n}")
    dx = length / n
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    L = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    L[0, n - 1] = -1.0
    L[n - 1, 0] = -1.0
    return (0.5 / dx**2) * L.tocsr()


def cm_problem(n: int, r: int, mu: float, length: float = CM_DOMAIN_LENGTH) -> ProblemSpec:
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r <= n, got n={n}, r={r}")
    H = cm_hamiltonian(n, length)
    dx = length / n
    k = np.arange(n)
    h_norm = float(np.max((2.0 - 2.0 * np.cos(2.0 * np.pi * k / n)) * 0.5 / dx**2))

    def f_value(X):
        return float(np.sum(X * (H @ X)))

    def f_grad(X):
        return 2.0 * (H @ X)

    return ProblemSpec("cm", n, r, mu, f_value, f_grad, 2.0 * h_norm, {"H": H})


# -- sparse PCA ---------------------------------------------------------------

def gen_spca_random(m: int, n: int, seed) -> np.ndarray:
    """Gaussian m x n data with zero-mean, unit-norm columns."""
    A = np.random.default_rng(seed).standard_normal((m, n))
    A -= A.mean(axis=0)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0.0] = 1.0
    return A / norms


def spca_problem(A, mu: float, r: int) -> ProblemSpec:
    if isinstance(A, SparseMatrix):
        A = A.tocsr()
    sparse = sp.issparse(A)
    if not sparse:
        A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"A must be a matrix, got shape {A.shape}")
    n = A.shape[1]
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r <= n={n} (columns of A), got r={r}")

    if n <= DENSE_GRAM_LIMIT:
        G = A.T @ A
        G = np.asarray(G.toarray() if sp.issparse(G) else G)
        G = sym(G)
        gram = G.__matmul__
    else:
        def gram(Z):
            return np.asarray(A.T @ (A @ Z))

    def f_value(X):
        return -float(np.sum(X * gram(X)))

    def f_grad(X):
        return -2.0 * gram(X)

    lmax = power_iteration(lambda v: gram(v[:, None])[:, 0], n, tol=1e-8)
    return ProblemSpec("spca", n, r, mu, f_value, f_grad, 2.0 * lmax, {"A": A})


# -- joint diagonalization ----------------------------------------------------

def gen_jointdiag_random(n: int, N: int = 5, seed=None) -> list[np.ndarray]:
    """A_i = P^T diag(lam_i) P with one shared random orthogonal P."""
    rng = np.random.default_rng(seed)
    P = random_stiefel(n, n, rng)
    mats = []
    for _ in range(N):
        lam = rng.standard_normal(n)
        A = P.T @ (lam[:, None] * P)
        mats.append(sym(A))
    return mats


def _diag_quad(A, X):
    """diag(X^T A X) as an r-vector, plus A X."""
    AX = A @ X
    return np.einsum("ij,ij->j", X, AX), AX


def jointdiag_problem(mats: Sequence[np.ndarray], mu: float, r: int) -> ProblemSpec:
    mats = [np.asarray(A, dtype=float) for A in mats]
    if not mats:
        raise DimensionError("need at least one matrix")
    n = mats[0].shape[0]
    for i, A in enumerate(mats):
        if A.shape != (n, n):
            raise DimensionError(f"matrix {i} has shape {A.shape}, expected {(n, n)}")
        if np.linalg.norm(A - A.T) > 1e-10 * max(1.0, np.linalg.norm(A)):
            raise ValueError(f"matrix {i} is not symmetric")
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r <= n, got n={n}, r={r}")

    def f_value(X):
        return -float(sum(np.sum(_diag_quad(A, X)[0] ** 2) for A in mats))

    def f_grad(X):
        G = np.zeros_like(X)
        for A in mats:
            q, AX = _diag_quad(A, X)
            G -= 4.0 * AX * q
        return G

    return ProblemSpec("jd", n, r, mu, f_value, f_grad, None, {"mats": mats})


def jointdiag_riemannian_gradient(mats: Sequence[np.ndarray], X) -> np.ndarray:
    """-4 sum_l (A_l X diag(q_l) - X sym(X^T A_l X diag(q_l))), q_l = diag(X^T A_l X)."""
    X = np.asarray(X, dtype=float)
    G = np.zeros_like(X)
    for A in mats:
        q, AX = _diag_quad(A, X)
        Y = AX * q
        G -= 4.0 * (Y - X @ sym(X.T @ Y))
    return G


def check_jointdiag_gradient(problem: ProblemSpec, X, tol: float = 1e-10) -> float:
    """Discrepancy between the closed-form Riemannian gradient and the projected one."""
    ref = project_tangent(X, problem.f_grad(X))
    err = float(np.linalg.norm(jointdiag_riemannian_gradient(problem.info["mats"], X) - ref))
    if err > tol * max(1.0, np.linalg.norm(ref)):
        raise AssertionError(f"Riemannian gradient formulas disagree by {err:.3e}")
    return err


# -- oracles and metrics ------------------------------------------------------

def finite_diff_gradient(problem: ProblemSpec, X, h_step: float = 1e-5) -> np.ndarray:
    """Central differences of f, entry by entry."""
    if not h_step > 0:
        raise ValueError("h_step must be positive")
    X = np.asarray(X, dtype=float)
    G = np.empty_like(X)
    E = X.copy()
    for idx in np.ndindex(X.shape):
        orig = E[idx]
        E[idx] = orig + h_step
        fp = problem.f_value(E)
        E[idx] = orig - h_step
        fm = problem.f_value(E)
        E[idx] = orig
        G[idx] = (fp - fm) / (2.0 * h_step)
    return G


def sparsity(X, threshold: float = 1e-5) -> float:
    """Fraction of entries with magnitude at most ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    X = np.asarray(X)
    return float(np.count_nonzero(np.abs(X) <= threshold)) / X.size
