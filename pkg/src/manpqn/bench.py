"""Experiment harness: seeded instance batches, aggregated tables and traces.

Instance ``i`` of an experiment uses seed ``base_seed + i``. The problem data
and the starting point are both derived from that seed, and every algorithm
in the experiment starts from the same X0.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .driver import ALGORITHMS, RunTrace, SolverConfig, solve
from .errors import NumericalAbort
from .mmio import load_matrix_market
from .problems import (
    ProblemSpec,
    cm_problem,
    gen_jointdiag_random,
    gen_spca_random,
    jointdiag_problem,
    spca_problem,
)
from .stiefel import random_stiefel

log = logging.getLogger(__name__)

PROBLEM_KINDS = ("cm", "spca", "spca-mtx", "jd")
CSV_HEADER = ("algo", "iters", "F", "sparsity", "cpu_s", "linesearch", "ssn_iters")
TRACE_HEADER = ("k", "F", "normV", "alpha", "ls", "ssn")
BIG_N = 2000


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class ExperimentAbort(RuntimeError):
    """A run hit a numerical abort; ``seed`` identifies the instance."""

    def __init__(self, message: str, seed: int, algo: str):
        super().__init__(message)
        self.seed = seed
        self.algo = algo


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "cm"
    n: int = 64
    r: int = 4
    mu: float = 0.1
    m_rows: int = 50
    N: int = 5
    mtx: str | None = None
    algos: tuple[str, ...] = ("manpqn", "manpg")
    instances: int = 50
    base_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    out: str | None = None
    serial: bool = False
    timing: bool = True
    big_n: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.problem not in PROBLEM_KINDS:
            raise ConfigError(f"problem must be one of {PROBLEM_KINDS}, got {self.problem!r}")
        if self.instances < 1:
            raise ConfigError(f"instances must be >= 1, got {self.instances}")
        if not self.algos:
            raise ConfigError("at least one algorithm is required")
        for a in self.algos:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if self.mu < 0:
            raise ConfigError(f"mu must be nonnegative, got {self.mu}")
        if self.problem == "spca-mtx":
            if not self.mtx:
                raise ConfigError("problem spca-mtx needs an mtx path")
            if not os.path.isfile(self.mtx):
                raise ConfigError(f"matrix file not found: {self.mtx}")
        else:
            if self.n < self.r:
                raise ConfigError(f"need n >= r, got n={self.n}, r={self.r}")
            if self.problem == "cm" and self.n < 4:
                raise ConfigError(f"compressed modes needs n >= 4, got {self.n}")
            if self.n > BIG_N and not self.big_n:
                raise ConfigError(f"n={self.n} exceeds {BIG_N}; pass big_n to allow it")
        if self.problem == "spca" and self.m_rows < 1:
            raise ConfigError(f"m_rows must be >= 1, got {self.m_rows}")
        if self.problem == "jd" and self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        return self


@dataclass
class ReportRow:
    algo: str
    iters: float
    F: float
    sparsity: float
    cpu_s: float
    linesearch: float
    ssn_iters: float
    runs: int = 0
    failures: int = 0

    def csv_values(self):
        return [self.algo, self.iters, self.F, self.sparsity, self.cpu_s, self.linesearch, self.ssn_iters]


@dataclass
class RunOutcome:
    seed: int
    algo: str
    trace: RunTrace


@dataclass
class ExperimentResult:
    rows: list[ReportRow]
    outcomes: list[RunOutcome]
    failures: list[RunOutcome]


def instance_seed(cfg: ExperimentConfig, i: int) -> int:
    return cfg.base_seed + i


def _load_mtx(path: str):
    return load_matrix_market(path)


def build_problem(cfg: ExperimentConfig, seed: int) -> ProblemSpec:
    if cfg.problem == "cm":
        return cm_problem(cfg.n, cfg.r, cfg.mu)
    if cfg.problem == "spca":
        return spca_problem(gen_spca_random(cfg.m_rows, cfg.n, seed), cfg.mu, cfg.r)
    if cfg.problem == "spca-mtx":
        A = _load_mtx(cfg.mtx)
        if A.shape[1] > BIG_N and not cfg.big_n:
            raise ConfigError(f"matrix has n={A.shape[1]} > {BIG_N} columns; pass big_n to allow it")
        return spca_problem(A, cfg.mu, cfg.r)
    return jointdiag_problem(gen_jointdiag_random(cfg.n, cfg.N, seed), cfg.mu, cfg.r)


def initial_point(problem: ProblemSpec, seed: int) -> np.ndarray:
    """X0 for an instance; a child stream of the instance seed, shared by all algorithms."""
    return random_stiefel(problem.n, problem.r, np.random.SeedSequence([seed, 1]))


def run_instance(cfg: ExperimentConfig, i: int) -> list[RunOutcome]:
    seed = instance_seed(cfg, i)
    problem = build_problem(cfg, seed)
    X0 = initial_point(problem, seed)
    out = []
    for algo in cfg.algos:
        try:
            trace = solve(problem, X0, algo, cfg.solver)
        except NumericalAbort as exc:
            raise ExperimentAbort(f"seed {seed}, {algo}: {exc}", seed, algo) from exc
        if not cfg.timing:
            _strip_timing(trace)
        out.append(RunOutcome(seed, algo, trace))
    return out


def _strip_timing(trace: RunTrace):
    trace.cpu_seconds = 0.0
    for rec in trace.records:
        rec.wall_time = 0.0


def aggregate(algos, outcomes: list[RunOutcome]) -> tuple[list[ReportRow], list[RunOutcome]]:
    """One row per algorithm over its converged runs; the rest are failures."""
    rows, failures = [], []
    for algo in algos:
        mine = [o for o in outcomes if o.algo == algo]
        ok = [o for o in mine if o.trace.converged]
        failures += [o for o in mine if not o.trace.converged]

        def mean(values):
            return float(np.mean(values)) if values else math.nan

        rows.append(ReportRow(
            algo=algo,
            iters=mean([o.trace.total_iters for o in ok]),
            F=mean([o.trace.F_final for o in ok]),
            sparsity=mean([o.trace.sparsity for o in ok]),
            cpu_s=mean([o.trace.cpu_seconds for o in ok]),
            linesearch=mean([o.trace.total_linesearch for o in ok]),
            ssn_iters=mean([o.trace.mean_ssn for o in ok]),
            runs=len(ok),
            failures=len(mine) - len(ok),
        ))
    return rows, failures


def run_experiment(cfg: ExperimentConfig, max_workers: int | None = None) -> ExperimentResult:
    cfg.validate()
    idx = range(cfg.instances)
    if cfg.serial or cfg.instances == 1:
        batches = [run_instance(cfg, i) for i in idx]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            batches = list(pool.map(run_instance, [cfg] * cfg.instances, idx))
    outcomes = [o for batch in batches for o in batch]
    rows, failures = aggregate(cfg.algos, outcomes)

    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(rows, out / "table.csv")
        emit_failures(failures, out / "failures.csv")
        for o in outcomes:
            emit_trace(o.trace, out / "traces" / f"{o.algo}_seed{o.seed}.csv")
    return ExperimentResult(rows, outcomes, failures)


def emit_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow([_fmt(v) for v in row.csv_values()])


def emit_failures(failures, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("algo", "seed", "status", "iters", "F"))
        for o in failures:
            w.writerow([o.algo, o.seed, o.trace.status, o.trace.total_iters, _fmt(o.trace.F_final)])


def emit_trace(trace: RunTrace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for rec in trace.records:
            w.writerow([rec.k, _fmt(rec.F), _fmt(rec.norm_v), _fmt(rec.alpha), rec.ls, rec.ssn])


def read_csv(path) -> list[dict]:
    """Parse a table or trace file back into dicts of floats (strings for 'algo')."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (v if k == "algo" else float(v)) for k, v in row.items()} for row in rows]


def _fmt(v):
    if isinstance(v, str):
        return v
    return repr(float(v))


def with_solver_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy of ``cfg`` with SolverConfig fields replaced; unknown keys raise ConfigError."""
    names = {f.name for f in dataclasses.fields(SolverConfig)}
    bad = set(overrides) - names
    if bad:
        raise ConfigError(f"unknown solver settings: {sorted(bad)}")
    try:
        solver = dataclasses.replace(cfg.solver, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return dataclasses.replace(cfg, solver=solver)
