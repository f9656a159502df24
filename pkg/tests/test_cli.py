import numpy as np
import pytest

import manpqn.bench as bench
from manpqn.bench import read_csv
from manpqn.cli import build_config, main, read_config_file, _parser
from manpqn.errors import NumericalAbort
from manpqn.mmio import write_matrix_market

BASE = ["--problem", "spca", "--n", "20", "--r", "3", "--mu", "0.4", "--m-rows", "15"]


def test_solve(capsys):
    assert main(["solve", *BASE, "--algo", "manpqn", "--algo", "manpg"]) == 0
    out = capsys.readouterr().out
    assert "manpqn" in out and "manpg" in out and "status=converged" in out


def test_bench_writes_table(tmp_path, capsys):
    rc = main(["bench", *BASE, "--instances", "2", "--serial", "--no-timing", "--out", str(tmp_path)])
    assert rc == 0
    rows = read_csv(tmp_path / "table.csv")
    assert [r["algo"] for r in rows] == ["manpqn", "manpg"]
    assert len(list((tmp_path / "traces").glob("*.csv"))) == 4


def test_trace(tmp_path):
    assert main(["trace", "--problem", "jd", "--n", "10", "--r", "2", "--mu", "0.05", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "manpqn_seed0.csv")
    assert rows[0]["k"] == 0


def test_trace_needs_out():
    assert main(["trace", *BASE]) == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# experiment\nproblem = cm\nn = 32\nr = 2\nmu = 0.2\nwindow = 4\n"
                        "algo = manpg, nls-manpg\nserial = true\ndelta = 3.5\n")
    args = _parser().parse_args(["bench", "--config", str(cfg_file), "--n", "48", "--gamma", "0.3"])
    cfg = build_config(args)
    assert cfg.problem == "cm" and cfg.n == 48 and cfg.r == 2 and cfg.mu == 0.2 and cfg.serial
    assert cfg.algos == ("manpg", "nls-manpg")
    assert cfg.solver.memory_m == 4 and cfg.solver.gamma == 0.3 and cfg.solver.delta == 3.5


@pytest.mark.parametrize("text", ["n 32\n", "colour = red\n", "n = abc\n", "serial = maybe\n", "algo = bfgs\n"])
def test_bad_config_file(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    assert main(["solve", "--config", str(path)]) == 1


def test_missing_config_file(tmp_path):
    from manpqn.bench import ConfigError
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "none.cfg")


@pytest.mark.parametrize("argv", [
    ["solve", "--problem", "cm", "--n", "3"],
    ["solve", "--problem", "spca-mtx"],
    ["solve", "--problem", "spca-mtx", "--mtx", "/no/such.mtx"],
    ["solve", "--problem", "cm", "--gamma", "1.5"],
    ["bench", "--problem", "cm", "--instances", "0"],
    ["solve", "--problem", "cm", "--n", "5000"],
])
def test_config_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "config error" in capsys.readouterr().err


def test_malformed_mtx_exit_1(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n")
    assert main(["solve", "--problem", "spca-mtx", "--mtx", str(path), "--r", "1"]) == 1


def test_mtx_solve(tmp_path):
    path = tmp_path / "a.mtx"
    write_matrix_market(path, np.random.default_rng(1).standard_normal((8, 6)))
    assert main(["solve", "--problem", "spca-mtx", "--mtx", str(path), "--r", "2", "--mu", "0.1"]) == 0


def test_numerical_abort_exit_2(monkeypatch, capsys):
    import manpqn.cli as cli

    def boom(*args, **kwargs):
        raise NumericalAbort("feasibility lost")
    monkeypatch.setattr(cli, "solve", boom)
    monkeypatch.setattr(bench, "solve", boom)
    assert main(["solve", *BASE, "--seed", "5"]) == 2
    assert "seed 5" in capsys.readouterr().err
    assert main(["bench", *BASE, "--instances", "1"]) == 2


@pytest.mark.parametrize("argv", [["solve", "--algo", "bfgs"], ["solve", "--n", "x"], ["fly"]])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1
