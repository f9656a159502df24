"""Tangent-space proximal subproblem

    min_V  <G, V> + 1/2 tr(V^T D V) + mu * ||X + V||_1   s.t.  V^T X + X^T V = 0

with D = diag(d), solved through its Lagrangian dual. For a symmetric
multiplier L the inner minimizer is

    V(L) = prox(X - D^{-1}(G - 2 X L)) - X,

and the multiplier is found by semismooth Newton on E(L) = V(L)^T X + X^T V(L) = 0.
Each Newton system (J + eta I)[dL] = -E is solved by CG over symmetric r x r
matrices with a matrix-free generalized Jacobian J.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError
from .prox import prox_jacobian_mask, scaled_prox_l1
from .qn import DiagonalMetric
from .stiefel import project_tangent, sym


@dataclass(frozen=True)
class SubsolverConfig:
    max_inner: int = 100
    inner_tol: float | None = None  # None -> max(1e-12, 1e-10 * r)
    cg_tol: float = 1e-8
    cg_maxit: int = 50
    accept_ratio: float = 1e-4
    max_halvings: int = 30

    def tol_for(self, r: int) -> float:
        if self.inner_tol is not None:
            return self.inner_tol
        return max(1e-12, 1e-10 * r)


class SubproblemInput:
    """Data of one subproblem: point X, Euclidean gradient G, metric, mu."""

    def __init__(self, x, g, metric: DiagonalMetric | np.ndarray, mu: float):
        x = np.asarray(x, dtype=float)
        g = np.asarray(g, dtype=float)
        if x.ndim != 2 or x.shape != g.shape:
            raise DimensionError(f"x and g must be matching 2-D arrays, got {x.shape} and {g.shape}")
        if not isinstance(metric, DiagonalMetric):
            metric = DiagonalMetric(metric)
        if metric.n != x.shape[0]:
            raise DimensionError(f"metric size {metric.n} does not match n={x.shape[0]}")
        self.x = x
        self.g = g
        self.metric = metric
        self.mu = float(mu)
        # B(L) = base + scaled_x @ L
        self.base = x - metric.d_inv[:, None] * g
        self.scaled_x = 2.0 * metric.d_inv[:, None] * x

    @property
    def shape(self):
        return self.x.shape

    def b_of_lambda(self, lam):
        return self.base + self.scaled_x @ lam


@dataclass
class SubproblemResult:
    v: np.ndarray
    lam: np.ndarray
    ssn_iters: int
    residual: float
    converged: bool
    safeguard_steps: int = field(default=0)


def v_of_lambda(inp: SubproblemInput, lam) -> np.ndarray:
    b = inp.b_of_lambda(lam)
    return scaled_prox_l1(b, inp.metric.d, inp.mu) - inp.x


def residual_E(inp: SubproblemInput, lam) -> np.ndarray:
    V = v_of_lambda(inp, lam)
    XtV = inp.x.T @ V
    return XtV + XtV.T


def apply_dual_jacobian(inp: SubproblemInput, mask, S) -> np.ndarray:
    """S -> M^T X + X^T M with M = mask * (2 D^{-1} X S)."""
    S = np.asarray(S, dtype=float)
    r = inp.x.shape[1]
    if S.shape != (r, r):
        raise DimensionError(f"S must be {r}x{r}, got {S.shape}")
    if np.shape(mask) != inp.x.shape:
        raise DimensionError(f"mask shape {np.shape(mask)} does not match {inp.x.shape}")
    M = mask * (inp.scaled_x @ S)
    XtM = inp.x.T @ M
    return XtM + XtM.T


def _inner(A, B) -> float:
    return float(np.sum(A * B))


def cg_solve(
    operator: Callable[[np.ndarray], np.ndarray],
    rhs,
    eta: float,
    tol: float = 1e-8,
    maxit: int = 50,
) -> np.ndarray:
    """Solve (G + eta I)[d] = -rhs over symmetric matrices by conjugate gradients."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    rhs = np.asarray(rhs, dtype=float)
    d = np.zeros_like(rhs)
    res = -rhs
    rr = _inner(res, res)
    stop = (tol * np.sqrt(rr)) ** 2
    if rr == 0.0:
        return d
    p = res.copy()
    for _ in range(maxit):
        Gp = operator(p)
        if np.linalg.norm(Gp - Gp.T) > 1e-10 * (1.0 + np.linalg.norm(Gp)):
            raise RuntimeError("dual Jacobian operator returned a non-symmetric matrix")
        Ap = Gp + eta * p
        pAp = _inner(p, Ap)
        if not pAp > 0:
            break
        a = rr / pAp
        d = d + a * p
        res = res - a * Ap
        rr_new = _inner(res, res)
        if rr_new <= stop:
            break
        p = res + (rr_new / rr) * p
        rr = rr_new
    return d


def dual_value(inp: SubproblemInput, lam, V=None) -> float:
    """Concave dual function L(V(lam), lam); its gradient is -E(lam)."""
    if V is None:
        V = v_of_lambda(inp, lam)
    return float(np.sum((inp.g - 2.0 * inp.x @ lam) * V) + 0.5 * inp.metric.norm_sq(V)
                 + inp.mu * np.abs(inp.x + V).sum())


def solve_subproblem(inp: SubproblemInput, lam_init=None, cfg: SubsolverConfig | None = None) -> SubproblemResult:
    """Regularized semismooth Newton on E(L) = 0.

    The full Newton step is taken when it shrinks ||E|| by the factor
    (1 - accept_ratio). Otherwise the step is halved until either that test or
    an Armijo ascent test on the dual function holds; the regularized Newton
    direction is always an ascent direction of the dual, so the second test
    cannot stall at kinks of the prox the way a residual-norm merit can. A
    short dual-ascent step L - c E(L) is the last resort. The returned V
    belongs to the multiplier with the smallest residual seen, projected onto
    the tangent space.
    """
    cfg = cfg or SubsolverConfig()
    X = inp.x
    r = X.shape[1]
    d_w, mu = inp.metric.d, inp.mu
    tol = cfg.tol_for(r)

    def evaluate(lam):
        b = inp.b_of_lambda(lam)
        V = scaled_prox_l1(b, d_w, mu) - X
        XtV = X.T @ V
        E = XtV + XtV.T
        return b, V, E, float(np.linalg.norm(E))

    lam = np.zeros((r, r)) if lam_init is None else sym(np.asarray(lam_init, dtype=float))
    b, V, E, nE = evaluate(lam)
    best_lam, best_V, best_nE = lam, V, nE
    iters = safeguards = 0

    while nE > tol and iters < cfg.max_inner:
        iters += 1
        mask = prox_jacobian_mask(b, d_w, mu)
        eta = max(1e-10, 0.1 * nE)
        step = cg_solve(lambda S: apply_dual_jacobian(inp, mask, S), E, eta, cfg.cg_tol, cfg.cg_maxit)
        trial = None
        slope = -_inner(E, step)
        if np.all(np.isfinite(step)) and slope > 0:
            theta = dual_value(inp, lam, V)
            t = 1.0
            for _ in range(cfg.max_halvings + 1):
                lam_t = lam + t * step
                cand = evaluate(lam_t)
                if cand[3] <= (1.0 - cfg.accept_ratio) * nE or (
                        t < 1.0 and dual_value(inp, lam_t, cand[1]) >= theta + cfg.accept_ratio * t * slope):
                    trial = (lam_t, cand)
                    break
                t *= 0.5
        if trial is None:
            safeguards += 1
            lam_t = lam - (0.1 / (1.0 + nE)) * E
            trial = (lam_t, evaluate(lam_t))
        lam, (b, V, E, nE) = trial
        lam = sym(lam)
        if nE < best_nE:
            best_lam, best_V, best_nE = lam, V, nE

    return SubproblemResult(
        v=project_tangent(X, best_V),
        lam=best_lam,
        ssn_iters=iters,
        residual=best_nE,
        converged=best_nE <= tol,
        safeguard_steps=safeguards,
    )


def subproblem_objective(inp: SubproblemInput, V) -> float:
    """<G, V> + 1/2 tr(V^T D V) + mu ||X + V||_1."""
    V = np.asarray(V, dtype=float)
    return float(np.sum(inp.g * V) + 0.5 * inp.metric.norm_sq(V) + inp.mu * np.abs(inp.x + V).sum())


def oracle_subproblem_small(inp: SubproblemInput) -> np.ndarray:
    """Exact subproblem minimizer for r = 1, n <= 8 by sign-pattern enumeration.

    With w = x + v the problem is min g^T (w - x) + 1/2 sum d_i (w_i - x_i)^2
    + mu ||w||_1 subject to x^T w = 1. Fixing the sign pattern of w turns it into
    an equality-constrained QP with a closed-form solution; the best
    sign-consistent candidate over all 3^n patterns is the minimizer.
    """
    n, r = inp.x.shape
    if r != 1 or n > 8:
        raise DimensionError(f"enumeration oracle supports r = 1 and n <= 8, got n={n}, r={r}")
    x, g = inp.x[:, 0], inp.g[:, 0]
    d, mu = inp.metric.d, inp.mu

    patterns = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n)))
    support = patterns != 0.0
    a = np.where(support, x - (g + mu * patterns) / d, 0.0)
    denom = np.where(support, x * x / d, 0.0).sum(axis=1)
    ok = denom > 1e-14
    lam = np.zeros(len(patterns))
    lam[ok] = (1.0 - (x * a).sum(axis=1)[ok]) / denom[ok]
    W = np.where(support, a + lam[:, None] * x / d, 0.0)
    consistent = ok & np.all(patterns * W >= -1e-12, axis=1)
    W = W[consistent]
    Vs = W - x
    obj = Vs @ g + 0.5 * (Vs * Vs) @ d + mu * np.abs(W).sum(axis=1)
    return Vs[np.argmin(obj)][:, None]
