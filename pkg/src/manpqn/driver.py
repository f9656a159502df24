"""Outer iterations: ManPQN and the ManPG family.

All four algorithms share one loop. They differ only in the diagonal metric
handed to the subproblem and in the line-search window:

    manpqn     diag of the damped L-BFGS matrix, nonmonotone window m
    manpg      (1/t) I, monotone Armijo
    manpg-ada  (1/t) I with t adapted from line-search outcomes, monotone
    nls-manpg  (1/t) I, nonmonotone window m
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericalAbort
from .qn import SCALINGS, DiagonalMetric, QnMemory
from .stiefel import check_point, feasibility_error, project_tangent, retract
from .subsolver import SubproblemInput, SubsolverConfig, solve_subproblem
from .problems import ProblemSpec, sparsity

log = logging.getLogger(__name__)

ALGORITHMS = ("manpqn", "manpg", "manpg-ada", "nls-manpg")


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 0.5
    sigma: float = 1e-4
    memory_m: int = 10
    memory_p: int = 5
    delta: float | None = None   # None: lipschitz hint if known, else 1
    delta_mode: str = "bb"       # "fixed" keeps B_0 = delta*I throughout
    delta_ratio: float = 1.2
    max_iter: int = 30000
    tol_factor: float = 1e-8
    max_inner: int = 100
    t_init: float | None = None
    ada_up: float = 1.01
    ada_down: float = 0.5
    t_min: float = 1e-6
    ls_cap: int = 50
    sparsity_threshold: float = 1e-5
    feas_abort: float = 1e-8

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.memory_m < 0:
            raise ValueError(f"memory_m must be >= 0, got {self.memory_m}")
        if self.memory_p < 1:
            raise ValueError(f"memory_p must be >= 1, got {self.memory_p}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.delta_ratio >= 1:
            raise ValueError(f"delta_ratio must be >= 1, got {self.delta_ratio}")
        if self.delta_mode not in SCALINGS:
            raise ValueError(f"delta_mode must be one of {SCALINGS}, got {self.delta_mode!r}")
        if not self.tol_factor > 0:
            raise ValueError(f"tol_factor must be positive, got {self.tol_factor}")
        if self.max_iter < 0 or self.max_inner < 1:
            raise ValueError("max_iter must be >= 0 and max_inner >= 1")
        if self.t_init is not None and not self.t_init > 0:
            raise ValueError(f"t_init must be positive, got {self.t_init}")


class FHistory:
    """The last m+1 objective values; max() is F at l(k)."""

    def __init__(self, m: int):
        self.values: deque[float] = deque(maxlen=m + 1)

    def push(self, F: float):
        self.values.append(float(F))

    def max(self) -> float:
        if not self.values:
            raise ValueError("empty objective history")
        return max(self.values)

    def __len__(self):
        return len(self.values)


@dataclass
class IterRecord:
    k: int
    F: float
    norm_v: float
    alpha: float = 0.0
    ls: int = 0
    ssn: int = 0
    wall_time: float = 0.0
    quad: float = 0.0       # ||V_k||_B^2
    F_ref: float = math.nan  # max of the window, F at l(k)
    feas: float = 0.0
    sub_converged: bool = True


@dataclass
class RunTrace:
    algo: str
    records: list[IterRecord] = field(default_factory=list)
    converged: bool = False
    status: str = "running"
    total_iters: int = 0
    F_final: float = math.nan
    sparsity: float = math.nan
    cpu_seconds: float = 0.0
    window: int = 0
    sigma: float = 0.0
    X_final: np.ndarray | None = field(default=None, repr=False)

    @property
    def total_linesearch(self) -> int:
        return sum(rec.ls for rec in self.records)

    @property
    def mean_ssn(self) -> float:
        return float(np.mean([rec.ssn for rec in self.records])) if self.records else 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])

    def to_dicts(self):
        return [asdict(rec) for rec in self.records]


def nonmonotone_accept(hist: FHistory, F_trial: float, alpha: float, quad: float, sigma: float) -> bool:
    """F_trial <= max(hist) - sigma/2 * alpha * quad."""
    if quad < 0 or not alpha > 0:
        raise ValueError("need quad >= 0 and alpha > 0")
    return F_trial <= hist.max() - 0.5 * sigma * alpha * quad


def is_eps_stationary(V, eps: float) -> bool:
    return float(np.linalg.norm(V)) <= eps


def stopping_eps(n: int, r: int, tol_factor: float = 1e-8) -> float:
    """eps with eps^2 = tol_factor * n * r."""
    return math.sqrt(tol_factor * n * r)


def baseline_stepsize(problem: ProblemSpec, cfg: SolverConfig) -> float:
    if cfg.t_init is not None:
        return cfg.t_init
    if problem.lipschitz_hint:
        return 1.0 / problem.lipschitz_hint
    return 1e-3


def initial_delta(problem: ProblemSpec, cfg: SolverConfig) -> float:
    if cfg.delta is not None:
        return cfg.delta
    return problem.lipschitz_hint or 1.0


def _run(problem: ProblemSpec, X0, cfg: SolverConfig, algo: str, callback=None) -> RunTrace:
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    X = check_point(X0).copy()
    n, r = X.shape
    if (n, r) != (problem.n, problem.r):
        raise ValueError(f"X0 has shape {(n, r)}, problem expects {(problem.n, problem.r)}")

    quasi_newton = algo == "manpqn"
    window = cfg.memory_m if algo in ("manpqn", "nls-manpg") else 0
    adaptive = algo == "manpg-ada"
    t = baseline_stepsize(problem, cfg)
    L = problem.lipschitz_hint
    t_max = 100.0 / L if L else 100.0 * t
    delta0 = initial_delta(problem, cfg)
    mem = QnMemory(cfg.memory_p, delta0, cfg.delta_mode, cfg.delta_ratio) if quasi_newton else None
    subcfg = SubsolverConfig(max_inner=cfg.max_inner)
    eps2 = cfg.tol_factor * n * r

    trace = RunTrace(algo=algo, window=window, sigma=cfg.sigma)
    hist = FHistory(window)
    F = problem.F(X)
    hist.push(F)
    grad = problem.f_grad(X)
    rgrad = project_tangent(X, grad)
    lam = np.zeros((r, r))
    start = time.perf_counter()

    for k in range(cfg.max_iter + 1):
        feas = feasibility_error(X)
        if feas > cfg.feas_abort or not np.isfinite(F):
            raise NumericalAbort(f"{algo}: iterate {k} left the manifold (feasibility error {feas:.3e}, F={F})")
        if callback is not None:
            callback(k, X)

        if quasi_newton:
            metric = mem.diag_metric(n) if k >= 1 else DiagonalMetric.scalar(n, delta0)
        else:
            metric = DiagonalMetric.scalar(n, 1.0 / t)
        sub = solve_subproblem(SubproblemInput(X, grad, metric, problem.mu), lam, subcfg)
        lam = sub.lam
        V = sub.v
        nv2 = float(np.sum(V * V))
        rec = IterRecord(k=k, F=F, norm_v=math.sqrt(nv2), ssn=sub.ssn_iters, feas=feas,
                         sub_converged=sub.converged)
        trace.records.append(rec)
        if not sub.converged:
            log.debug("%s k=%d: subproblem residual %.3e", algo, k, sub.residual)

        if nv2 <= eps2:
            trace.converged, trace.status = True, "converged"
            rec.wall_time = time.perf_counter() - start
            break
        if k == cfg.max_iter:
            trace.status = "max_iter"
            rec.wall_time = time.perf_counter() - start
            break

        quad = metric.norm_sq(V)
        F_ref = hist.max()
        alpha, ls = 1.0, 0
        while True:
            X_trial = retract(X, alpha * V)
            F_trial = problem.F(X_trial)
            if nonmonotone_accept(hist, F_trial, alpha, quad, cfg.sigma):
                break
            if ls == cfg.ls_cap:
                X_trial = None
                break
            alpha *= cfg.gamma
            ls += 1
        rec.ls, rec.quad, rec.F_ref = ls, quad, F_ref
        rec.wall_time = time.perf_counter() - start
        if X_trial is None:
            trace.status = "stall"
            log.warning("%s: line search stalled at k=%d", algo, k)
            break
        rec.alpha = alpha

        if adaptive:
            t = min(t * cfg.ada_up, t_max) if ls == 0 else max(t * cfg.ada_down, cfg.t_min)

        grad_new = problem.f_grad(X_trial)
        rgrad_new = project_tangent(X_trial, grad_new)
        if quasi_newton:
            mem.push_pair(X_trial - X, rgrad_new - rgrad)
        X, F, grad, rgrad = X_trial, F_trial, grad_new, rgrad_new
        hist.push(F)

    trace.cpu_seconds = time.perf_counter() - start
    trace.total_iters = len(trace.records) - 1
    trace.F_final = F
    trace.X_final = X
    trace.sparsity = sparsity(X, cfg.sparsity_threshold)
    return trace


def manpqn_solve(problem: ProblemSpec, X0, cfg: SolverConfig | None = None, callback=None) -> RunTrace:
    """Proximal quasi-Newton with nonmonotone line search.

    ``callback(k, X_k)`` is invoked once per iterate, before the subproblem.
    """
    return _run(problem, X0, cfg or SolverConfig(), "manpqn", callback)


def manpg_solve(problem: ProblemSpec, X0, cfg: SolverConfig | None = None, variant: str = "plain",
                callback=None) -> RunTrace:
    """Manifold proximal gradient; ``variant`` is 'plain', 'ada' or 'nls'."""
    algo = {"plain": "manpg", "ada": "manpg-ada", "nls": "nls-manpg"}.get(variant)
    if algo is None:
        raise ValueError(f"unknown ManPG variant {variant!r}")
    return _run(problem, X0, cfg or SolverConfig(), algo, callback)


def solve(problem: ProblemSpec, X0, algo: str = "manpqn", cfg: SolverConfig | None = None,
          callback=None) -> RunTrace:
    return _run(problem, X0, cfg or SolverConfig(), algo, callback)


def envelope(F_values, window: int) -> np.ndarray:
    """max of F over the trailing window of m+1 values, for every k."""
    F_values = np.asarray(F_values, dtype=float)
    return np.array([F_values[max(0, k - window):k + 1].max() for k in range(len(F_values))])
