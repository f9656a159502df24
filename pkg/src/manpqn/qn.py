"""Damped limited-memory quasi-Newton metric.

The memory stores up to ``p`` pairs (s_j, ybar_j) of n x r matrices. Every
outer iteration the matrix

    B_0 = delta * I
    B_i = B_{i-1} - B_{i-1} s s^T B_{i-1} / tr(s^T B_{i-1} s) + ybar ybar^T / tr(s^T ybar)

is rebuilt from scratch over the stored pairs (oldest first), and only its
diagonal is handed to the subproblem solver.

With ``scaling="bb"`` the base scale delta follows the newest pair,
delta = tr(s^T y) / ||s||^2, limited to a factor ``max_ratio`` change per
pair, and every stored pair is re-damped against the new delta so the
damping bound always refers to the current B_0.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, MetricError

log = logging.getLogger(__name__)

DAMPING = 0.25
# relative guard on tr(s^T B s) in the B recursion
CURVATURE_FLOOR = 1e-14
SCALINGS = ("fixed", "bb")
DELTA_BOUNDS = (1e-6, 1e6)


@dataclass(frozen=True)
class DiagonalMetric:
    """Positive weights d = diag(B_k); row i of the subproblem is scaled by d[i]."""

    d: np.ndarray
    d_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(-1)
        if not np.all(np.isfinite(d)) or not np.all(d > 0):
            raise MetricError(f"metric entries must be finite and positive (min {d.min():.3e})")
        d.setflags(write=False)
        d_inv = 1.0 / d
        d_inv.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "d_inv", d_inv)

    @classmethod
    def scalar(cls, n: int, value: float) -> "DiagonalMetric":
        return cls(np.full(n, float(value)))

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def norm_sq(self, V: np.ndarray) -> float:
        """tr(V^T diag(d) V)."""
        return float(np.sum(self.d[:, None] * V * V))


def damped_pair(s: np.ndarray, y: np.ndarray, delta: float) -> tuple[np.ndarray, float]:
    """Powell-style damping with H_0^{-1} = delta * I.

    Returns (ybar, beta) with ybar = beta*y + (1-beta)*delta*s, which guarantees
    tr(s^T ybar) >= 0.25 * delta * ||s||^2.
    """
    sBs = delta * float(np.sum(s * s))
    sy = float(np.sum(s * y))
    if sy < DAMPING * sBs:
        beta = (1.0 - DAMPING) * sBs / (sBs - sy)
    else:
        beta = 1.0
    return beta * y + (1.0 - beta) * delta * s, beta


class QnMemory:
    """Ring buffer of damped (s, ybar) pairs, oldest first.

    ``pairs`` holds the damped pairs used by the recursion; the undamped y's are
    kept alongside so a change of delta can re-damp them.
    """

    def __init__(self, capacity: int = 5, delta: float = 1.0, scaling: str = "fixed",
                 max_ratio: float = 1.2):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if not delta > 0:
            raise ValueError(f"delta must be positive, got {delta}")
        if scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}, got {scaling!r}")
        if not max_ratio >= 1:
            raise ValueError(f"max_ratio must be >= 1, got {max_ratio}")
        self.max_ratio = float(max_ratio)
        self.capacity = int(capacity)
        self.delta = float(delta)
        self.scaling = scaling
        self.pairs: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=self.capacity)
        self._raw: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=self.capacity)
        self.skipped = 0

    def __len__(self):
        return len(self.pairs)

    def push_pair(self, s, y) -> bool:
        """Damp and store a pair; returns False if s is too small to use."""
        s = np.array(s, dtype=float)
        y = np.array(y, dtype=float)
        if s.shape != y.shape:
            raise DimensionError(f"s and y shapes differ: {s.shape} vs {y.shape}")
        if self.pairs and s.shape != self.pairs[0][0].shape:
            raise DimensionError(f"pair shape {s.shape} differs from stored {self.pairs[0][0].shape}")
        if np.linalg.norm(s) < 1e-14 * np.sqrt(s.size):
            log.debug("skipping degenerate quasi-Newton pair (||s|| = %.3e)", np.linalg.norm(s))
            self.skipped += 1
            return False
        self._raw.append((s, y))
        sy = float(np.sum(s * y))
        if self.scaling == "bb" and sy > 0:
            lo = max(DELTA_BOUNDS[0], self.delta / self.max_ratio)
            hi = min(DELTA_BOUNDS[1], self.delta * self.max_ratio)
            self.set_delta(min(hi, max(lo, sy / float(np.sum(s * s)))))
        else:
            self.pairs.append((s, damped_pair(s, y, self.delta)[0]))
        return True

    def set_delta(self, delta: float):
        """Change the base scale and re-damp every stored pair against it."""
        if not delta > 0:
            raise ValueError(f"delta must be positive, got {delta}")
        self.delta = float(delta)
        self.pairs.clear()
        for s, y in self._raw:
            self.pairs.append((s, damped_pair(s, y, self.delta)[0]))

    def clear(self):
        self.pairs.clear()
        self._raw.clear()

    def diag_metric(self, n: int | None = None) -> DiagonalMetric:
        """diag(B_k), computed from a low-rank representation of B_k.

        B_k is kept as delta*I + sum_t c_t U_t U_t^T with n x r blocks U_t, so the
        diagonal costs O(p^2 n r^2) instead of the O(p n^2) dense recursion.
        """
        if n is None:
            if not self.pairs:
                raise ValueError("n is required for an empty memory")
            n = self.pairs[0][0].shape[0]
        delta = self.delta
        coefs: list[float] = []
        blocks: list[np.ndarray] = []
        for s, ybar in self.pairs:
            Bs = delta * s
            for c, U in zip(coefs, blocks):
                Bs = Bs + c * (U @ (U.T @ s))
            sBs = float(np.sum(s * Bs))
            if sBs <= CURVATURE_FLOOR * float(np.sum(s * s)):
                log.debug("skipping pair with tr(s^T B s) = %.3e", sBs)
                continue
            coefs += [-1.0 / sBs, 1.0 / float(np.sum(s * ybar))]
            blocks += [Bs, ybar]
        d = np.full(n, delta)
        for c, U in zip(coefs, blocks):
            d += c * np.einsum("ij,ij->i", U, U)
        if not np.all(d > 0):
            raise MetricError(f"quasi-Newton diagonal lost positivity (min {d.min():.3e})")
        return DiagonalMetric(d)


def dense_B(mem: QnMemory, n: int | None = None) -> np.ndarray:
    """Dense B_k by the plain recursion (reference implementation)."""
    if n is None:
        n = mem.pairs[0][0].shape[0]
    B = mem.delta * np.eye(n)
    for s, ybar in mem.pairs:
        Bs = B @ s
        sBs = float(np.sum(s * Bs))
        if sBs <= CURVATURE_FLOOR * float(np.sum(s * s)):
            continue
        B = B - Bs @ Bs.T / sBs + ybar @ ybar.T / float(np.sum(s * ybar))
        B = 0.5 * (B + B.T)
    return B


def dense_H(mem: QnMemory, n: int | None = None) -> np.ndarray:
    """Dense H_k = B_k^{-1}, recursed on H alone.

    Each step is the Woodbury inverse of the rank-2r update in ``dense_B``;
    B_{i-1} s is recovered as H_{i-1}^{-1} s, so no B matrix is ever formed.
    For r = 1 this is the familiar BFGS inverse update (see
    ``dense_H_bfgs_form``); for r > 1 that form is not an inverse.
    """
    if n is None:
        n = mem.pairs[0][0].shape[0]
    H = np.eye(n) / mem.delta
    for s, ybar in mem.pairs:
        r = s.shape[1]
        Bs = np.linalg.solve(H, s)
        StBS = s.T @ Bs
        sBs = float(np.trace(StBS))
        if sBs <= CURVATURE_FLOOR * float(np.sum(s * s)):
            continue
        sy = float(np.sum(s * ybar))
        Hy = H @ ybar
        K = np.block([
            [StBS - sBs * np.eye(r), s.T @ ybar],
            [ybar.T @ s, ybar.T @ Hy + sy * np.eye(r)],
        ])
        HU = np.hstack([s, Hy])
        H = H - HU @ np.linalg.solve(K, HU.T)
        H = 0.5 * (H + H.T)
    return H


def dense_H_bfgs_form(mem: QnMemory, n: int | None = None) -> np.ndarray:
    """(I - rho s ybar^T) H (I - rho ybar s^T) + rho s s^T with rho = 1/tr(s^T ybar).

    Equals ``dense_H`` when r = 1.
    """
    if n is None:
        n = mem.pairs[0][0].shape[0]
    eye = np.eye(n)
    H = eye / mem.delta
    for s, ybar in mem.pairs:
        rho = 1.0 / float(np.sum(s * ybar))
        W = eye - rho * s @ ybar.T
        H = W @ H @ W.T + rho * s @ s.T
    return H
