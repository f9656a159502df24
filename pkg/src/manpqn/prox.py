"""The l1 regularizer h(X) = mu * ||X||_1 under a diagonal (row-wise) metric.

With metric D = diag(d), the scaled proximal mapping

    argmin_Y  mu * ||Y||_1 + 1/2 * tr((Y - B)^T D (Y - B))

separates into scalar soft-thresholding problems; row i uses threshold mu / d_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, MetricError


def _check_metric(d, nrows: int) -> np.ndarray:
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.shape[0] != nrows:
        raise DimensionError(f"metric has {d.shape[0]} entries, matrix has {nrows} rows")
    if not np.all(d > 0):
        raise MetricError(f"metric entries must be positive (min {d.min():.3e})")
    return d


def l1_value(X, mu: float) -> float:
    return float(mu * np.abs(X).sum())


def scaled_prox_l1(b, d, mu: float) -> np.ndarray:
    """Row-weighted soft thresholding: sign(b) * max(|b| - mu/d_i, 0)."""
    b = np.asarray(b, dtype=float)
    b2 = b if b.ndim == 2 else b[:, None]
    d = _check_metric(d, b2.shape[0])
    thresh = (mu / d)[:, None]
    out = np.sign(b2) * np.maximum(np.abs(b2) - thresh, 0.0)
    return out.reshape(b.shape)


def prox_jacobian_mask(b, d, mu: float) -> np.ndarray:
    """0/1 element of the generalized Jacobian of ``scaled_prox_l1`` at b.

    Entries exactly on the threshold get 0.
    """
    b = np.asarray(b, dtype=float)
    b2 = b if b.ndim == 2 else b[:, None]
    d = _check_metric(d, b2.shape[0])
    mask = (np.abs(b2) > (mu / d)[:, None]).astype(float)
    return mask.reshape(b.shape)


@dataclass(frozen=True)
class L1Regularizer:
    """h(X) = mu * ||X||_1.

    Anything exposing ``value``, ``prox`` and ``jacobian_mask`` with these
    signatures can stand in for a different separable convex h.
    """

    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")

    def value(self, X) -> float:
        return l1_value(X, self.mu)

    def prox(self, b, d) -> np.ndarray:
        return scaled_prox_l1(b, d, self.mu)

    def jacobian_mask(self, b, d) -> np.ndarray:
        return prox_jacobian_mask(b, d, self.mu)
