import dataclasses

import numpy as np
import pytest

import manpqn.bench as bench
from manpqn.bench import (
    CSV_HEADER,
    ConfigError,
    ExperimentAbort,
    ExperimentConfig,
    ReportRow,
    aggregate,
    emit_csv,
    emit_trace,
    read_csv,
    run_experiment,
    with_solver_overrides,
)
from manpqn.driver import SolverConfig, solve
from manpqn.errors import NumericalAbort
from manpqn.mmio import write_matrix_market
from manpqn.problems import cm_problem
from manpqn.stiefel import random_stiefel

SMALL = dict(problem="spca", n=20, r=3, mu=0.4, m_rows=15, timing=False)


def test_shared_start(monkeypatch):
    seen = []
    real = bench.solve

    def spy(problem, X0, algo, cfg):
        seen.append(X0.copy())
        return real(problem, X0, algo, cfg)

    monkeypatch.setattr(bench, "solve", spy)
    run_experiment(ExperimentConfig(algos=("manpqn", "manpg"), instances=1, **SMALL))
    assert len(seen) == 2
    np.testing.assert_array_equal(seen[0], seen[1])


def test_serial_csv_bytes_reproducible(tmp_path):
    cfg = ExperimentConfig(instances=2, serial=True, **SMALL)
    run_experiment(dataclasses.replace(cfg, out=str(tmp_path / "a")))
    run_experiment(dataclasses.replace(cfg, out=str(tmp_path / "b")))
    for name in ("table.csv", "failures.csv", "traces/manpqn_seed1.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_matches_serial():
    cfg = ExperimentConfig(instances=3, algos=("manpqn", "nls-manpg"), **SMALL)
    par = run_experiment(cfg, max_workers=2).rows
    ser = run_experiment(dataclasses.replace(cfg, serial=True)).rows
    assert par == ser


def test_seed_contract():
    cfg = ExperimentConfig(instances=2, base_seed=40, serial=True, **SMALL)
    res = run_experiment(cfg)
    assert sorted({o.seed for o in res.outcomes}) == [40, 41]
    P = bench.build_problem(cfg, 41)
    ref = solve(P, bench.initial_point(P, 41), "manpqn", cfg.solver)
    got = [o for o in res.outcomes if o.seed == 41 and o.algo == "manpqn"][0]
    assert got.trace.F_final == ref.F_final


def test_emit_csv_header_only(tmp_path):
    emit_csv([], tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == ",".join(CSV_HEADER) + "\n"


def test_csv_round_trip(tmp_path):
    rows = [ReportRow("manpqn", 56.32, 1.4321234567891234, 0.8, 0.123, 116.0, 4.21),
            ReportRow("manpg", 800.0, -2.274, 0.89, 1e-3, 0.0, 2.5)]
    emit_csv(rows, tmp_path / "t.csv")
    back = read_csv(tmp_path / "t.csv")
    for row, parsed in zip(rows, back):
        assert parsed["algo"] == row.algo
        for key in CSV_HEADER[1:]:
            assert parsed[key] == pytest.approx(getattr(row, key), abs=1e-12)


def test_trace_file(tmp_path):
    P = cm_problem(16, 2, 0.1)
    tr = solve(P, random_stiefel(16, 2, 0))
    emit_trace(tr, tmp_path / "x" / "tr.csv")
    lines = (tmp_path / "x" / "tr.csv").read_text().splitlines()
    assert lines[0] == "k,F,normV,alpha,ls,ssn"
    back = read_csv(tmp_path / "x" / "tr.csv")
    assert len(back) == tr.total_iters + 1
    np.testing.assert_allclose([b["F"] for b in back], tr.column("F"), rtol=0, atol=1e-12)


def test_traces_satisfy_envelope(tmp_path):
    from manpqn.driver import envelope
    run_experiment(ExperimentConfig(instances=2, serial=True, out=str(tmp_path), **SMALL))
    for path in (tmp_path / "traces").glob("*.csv"):
        F = [row["F"] for row in read_csv(path)]
        window = 10 if path.name.startswith("manpqn") else 0
        env = envelope(F, window)
        assert np.all(np.diff(env) <= 1e-12 * (1 + np.abs(env[:-1])))


def test_failures_reported_separately(tmp_path):
    cfg = with_solver_overrides(ExperimentConfig(instances=2, serial=True, out=str(tmp_path), **SMALL), max_iter=3)
    res = run_experiment(cfg)
    assert len(res.failures) == 4
    assert all(row.runs == 0 and row.failures == 2 and np.isnan(row.F) for row in res.rows)
    lines = (tmp_path / "failures.csv").read_text().splitlines()
    assert lines[0] == "algo,seed,status,iters,F" and len(lines) == 5


def test_aggregate_means_over_converged_only():
    class T:
        def __init__(self, conv, it):
            self.converged, self.total_iters, self.F_final = conv, it, float(it)
            self.sparsity, self.cpu_seconds, self.total_linesearch, self.mean_ssn = 0.5, 0.0, it, 1.0
    outs = [bench.RunOutcome(0, "manpg", T(True, 10)), bench.RunOutcome(1, "manpg", T(True, 20)),
            bench.RunOutcome(2, "manpg", T(False, 99))]
    rows, failures = aggregate(("manpg",), outs)
    assert rows[0].iters == 15 and rows[0].linesearch == 15 and rows[0].runs == 2
    assert [f.seed for f in failures] == [2]


def test_abort_reports_seed(monkeypatch):
    def boom(*args, **kwargs):
        raise NumericalAbort("left the manifold")
    monkeypatch.setattr(bench, "solve", boom)
    with pytest.raises(ExperimentAbort) as info:
        run_experiment(ExperimentConfig(instances=1, base_seed=7, **SMALL))
    assert info.value.seed == 7 and "seed 7" in str(info.value)


@pytest.mark.parametrize("kwargs", [
    dict(problem="nope"), dict(instances=0), dict(algos=()), dict(algos=("bfgs",)),
    dict(problem="spca-mtx"), dict(problem="spca-mtx", mtx="/no/such/file.mtx"),
    dict(n=2, r=3), dict(problem="cm", n=3, r=1), dict(n=2500), dict(mu=-1.0),
])
def test_config_errors(kwargs):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kwargs).validate()


def test_big_n_opt_in():
    ExperimentConfig(n=2500, big_n=True).validate()


def test_solver_overrides():
    cfg = with_solver_overrides(ExperimentConfig(), gamma=0.3, memory_m=2)
    assert cfg.solver == SolverConfig(gamma=0.3, memory_m=2)
    with pytest.raises(ConfigError):
        with_solver_overrides(cfg, colour="red")
    with pytest.raises(ConfigError):
        with_solver_overrides(cfg, gamma=2.0)


def test_spca_from_matrix_market(tmp_path):
    A = np.random.default_rng(0).standard_normal((12, 10))
    path = tmp_path / "a.mtx"
    write_matrix_market(path, A)
    res = run_experiment(ExperimentConfig(problem="spca-mtx", mtx=str(path), r=2, mu=0.2, instances=2,
                                          serial=True, timing=False))
    assert all(row.runs == 2 for row in res.rows)
