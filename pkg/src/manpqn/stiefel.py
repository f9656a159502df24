"""Geometry of the Stiefel manifold St(n, r) = {X in R^{n x r} : X^T X = I}.

Points and tangent vectors are plain ``numpy`` arrays of shape ``(n, r)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, RetractionError

# smallest singular value of X + xi accepted by the polar retraction
SINGULAR_FLOOR = 1e-12


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got shape {A.shape}")
    return A


def _check_same_shape(X: np.ndarray, Z: np.ndarray) -> None:
    if X.shape != Z.shape:
        raise DimensionError(f"shape mismatch: {X.shape} vs {Z.shape}")


def sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def feasibility_error(X) -> float:
    """Frobenius norm of X^T X - I."""
    X = _as_matrix(X)
    return float(np.linalg.norm(X.T @ X - np.eye(X.shape[1])))


def tangency_error(X, V) -> float:
    """Frobenius norm of V^T X + X^T V (zero iff V is tangent at X)."""
    X, V = _as_matrix(X), _as_matrix(V)
    _check_same_shape(X, V)
    XtV = X.T @ V
    return float(np.linalg.norm(XtV + XtV.T))


def project_tangent(X, Z) -> np.ndarray:
    """Orthogonal projection of Z onto the tangent space at X: Z - X sym(X^T Z)."""
    X, Z = _as_matrix(X), _as_matrix(Z)
    _check_same_shape(X, Z)
    return Z - X @ sym(X.T @ Z)


def riemannian_gradient(X, euclid_grad) -> np.ndarray:
    """Riemannian gradient under the embedded metric."""
    return project_tangent(X, euclid_grad)


def retract(X, xi) -> np.ndarray:
    """Polar (SVD) retraction: U V^T where X + xi = U S V^T is a thin SVD.

    Raises RetractionError when X + xi is numerically rank deficient, since the
    polar factor is then not unique.
    """
    X, xi = _as_matrix(X), _as_matrix(xi)
    _check_same_shape(X, xi)
    U, s, Vt = np.linalg.svd(X + xi, full_matrices=False)
    if s[-1] <= SINGULAR_FLOOR:
        raise RetractionError(
            f"X + xi is rank deficient (smallest singular value {s[-1]:.3e})",
            smallest_singular_value=float(s[-1]),
        )
    return U @ Vt


def random_stiefel(n: int, r: int, rng_seed=None) -> np.ndarray:
    """Orthonormal factor of an n x r standard Gaussian matrix.

    ``rng_seed`` may be an int, a SeedSequence or a Generator.
    """
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r <= n, got n={n}, r={r}")
    rng = np.random.default_rng(rng_seed)
    G = rng.standard_normal((n, r))
    U, _, Vt = np.linalg.svd(G, full_matrices=False)
    return U @ Vt


def check_point(X, tol: float = 1e-10) -> np.ndarray:
    """Validate a Stiefel point and return it as a float array."""
    X = _as_matrix(X)
    n, r = X.shape
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r <= n, got shape {X.shape}")
    err = feasibility_error(X)
    if err > tol:
        raise DimensionError(f"X is not on the Stiefel manifold: ||X^T X - I||_F = {err:.3e}")
    return X
