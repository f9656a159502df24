"""Command line entry point.

    manpqn solve --problem cm --n 64 --r 4 --mu 0.1
    manpqn bench --problem spca --n 100 --r 5 --mu 0.8 --instances 20 --out results/
    manpqn trace --problem jd --n 32 --r 4 --mu 0.1 --algo manpqn --out traces/

Exit status: 0 on success, 1 on a configuration error, 2 on a numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import (
    PROBLEM_KINDS,
    ConfigError,
    ExperimentAbort,
    ExperimentConfig,
    build_problem,
    emit_trace,
    initial_point,
    instance_seed,
    run_experiment,
    with_solver_overrides,
)
from .driver import ALGORITHMS, solve
from .errors import DimensionError, MatrixMarketError, NumericalAbort

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2

# flag dest -> (ExperimentConfig field or "solver.<field>", type)
KEYS = {
    "problem": ("problem", str),
    "n": ("n", int),
    "r": ("r", int),
    "mu": ("mu", float),
    "m_rows": ("m_rows", int),
    "N": ("N", int),
    "mtx": ("mtx", str),
    "instances": ("instances", int),
    "seed": ("base_seed", int),
    "out": ("out", str),
    "max_iter": ("solver.max_iter", int),
    "tol_factor": ("solver.tol_factor", float),
    "gamma": ("solver.gamma", float),
    "sigma": ("solver.sigma", float),
    "window": ("solver.memory_m", int),
    "pairs": ("solver.memory_p", int),
    "delta": ("solver.delta", float),
    "delta_mode": ("solver.delta_mode", str),
    "t_init": ("solver.t_init", float),
}
BOOL_KEYS = ("serial", "big_n", "no_timing")


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1, leaving 2 for numerical aborts."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="manpqn", description="Proximal quasi-Newton on the Stiefel manifold.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)
    helps = {
        "solve": "solve one instance and print a summary",
        "bench": "run an instance batch and write the averaged table",
        "trace": "solve one instance and write per-iteration trace files",
    }
    for verb, text in helps.items():
        q = sub.add_parser(verb, help=text)
        q.add_argument("--config", help="key=value file; command-line flags take precedence")
        q.add_argument("--problem", choices=PROBLEM_KINDS)
        q.add_argument("--n", type=int)
        q.add_argument("--r", type=int)
        q.add_argument("--mu", type=float)
        q.add_argument("--m-rows", dest="m_rows", type=int, help="rows of the random SPCA data matrix")
        q.add_argument("--N", dest="N", type=int, help="number of matrices for joint diagonalization")
        q.add_argument("--big-n", dest="big_n", action="store_true", default=None,
                       help="allow n above 2000")
        q.add_argument("--algo", action="append", choices=ALGORITHMS, help="repeatable")
        q.add_argument("--instances", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--max-iter", dest="max_iter", type=int)
        q.add_argument("--tol-factor", dest="tol_factor", type=float)
        q.add_argument("--gamma", type=float)
        q.add_argument("--sigma", type=float)
        q.add_argument("--window", type=int, help="nonmonotone window m")
        q.add_argument("--pairs", type=int, help="quasi-Newton memory p")
        q.add_argument("--delta", type=float, help="initial metric scale")
        q.add_argument("--delta-mode", dest="delta_mode", choices=("bb", "fixed"))
        q.add_argument("--t-init", dest="t_init", type=float, help="baseline step size")
        q.add_argument("--mtx", help="Matrix Market file for --problem spca-mtx")
        q.add_argument("--out", help="output directory")
        q.add_argument("--serial", action="store_true", default=None)
        q.add_argument("--no-timing", dest="no_timing", action="store_true", default=None,
                       help="write zero timings so outputs are byte-reproducible")
        q.add_argument("-v", "--verbose", action="store_true")
    return p


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment. Keys use flag names."""
    values: dict[str, object] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "algo":
            values["algo"] = [a.strip() for a in val.split(",") if a.strip()]
        elif key in BOOL_KEYS:
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{path}:{lineno}: {key} expects a boolean")
            values[key] = val.lower() in ("true", "1", "yes")
        elif key in KEYS:
            try:
                values[key] = KEYS[key][1](val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    settings = read_config_file(args.config) if args.config else {}
    for key in (*KEYS, *BOOL_KEYS, "algo"):
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val

    top, solver = {}, {}
    for key, val in settings.items():
        if key == "algo":
            bad = [a for a in val if a not in ALGORITHMS]
            if bad:
                raise ConfigError(f"unknown algorithm(s) {bad}")
            top["algos"] = tuple(dict.fromkeys(val))
        elif key == "no_timing":
            top["timing"] = not val
        elif key in BOOL_KEYS:
            top[key] = val
        else:
            target = KEYS[key][0]
            if target.startswith("solver."):
                solver[target[len("solver."):]] = val
            else:
                top[target] = val
    if "algos" not in top and args.verb != "bench":
        top["algos"] = ("manpqn",)
    try:
        cfg = ExperimentConfig(**top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return with_solver_overrides(cfg, **solver).validate()


def _single(cfg: ExperimentConfig):
    seed = instance_seed(cfg, 0)
    problem = build_problem(cfg, seed)
    X0 = initial_point(problem, seed)
    out = []
    for algo in cfg.algos:
        try:
            out.append(solve(problem, X0, algo, cfg.solver))
        except NumericalAbort as exc:
            raise ExperimentAbort(f"seed {seed}, {algo}: {exc}", seed, algo) from exc
    return seed, out


def cmd_solve(cfg: ExperimentConfig) -> int:
    seed, traces = _single(cfg)
    print(f"problem={cfg.problem} seed={seed}")
    for tr in traces:
        print(f"{tr.algo:10s} status={tr.status} iters={tr.total_iters} F={tr.F_final:.6f} "
              f"sparsity={tr.sparsity:.4f} cpu_s={tr.cpu_seconds:.3f} linesearch={tr.total_linesearch} "
              f"ssn_iters={tr.mean_ssn:.2f}")
    return EXIT_OK


def cmd_trace(cfg: ExperimentConfig) -> int:
    if not cfg.out:
        raise ConfigError("trace needs --out")
    seed, traces = _single(cfg)
    for tr in traces:
        path = Path(cfg.out) / f"{tr.algo}_seed{seed}.csv"
        emit_trace(tr, path)
        print(f"wrote {path} ({tr.total_iters + 1} rows)")
    return EXIT_OK


def cmd_bench(cfg: ExperimentConfig) -> int:
    result = run_experiment(cfg)
    header = f"{'algo':10s} {'iters':>9s} {'F':>12s} {'sparsity':>9s} {'cpu_s':>8s} {'linesearch':>10s} {'ssn':>6s}"
    print(header)
    for row in result.rows:
        print(f"{row.algo:10s} {row.iters:9.1f} {row.F:12.6f} {row.sparsity:9.4f} {row.cpu_s:8.3f} "
              f"{row.linesearch:10.1f} {row.ssn_iters:6.2f}")
    if result.failures:
        print(f"{len(result.failures)} run(s) did not converge:")
        for o in result.failures:
            print(f"  {o.algo} seed={o.seed} status={o.trace.status}")
    if cfg.out:
        print(f"wrote {Path(cfg.out) / 'table.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return {"solve": cmd_solve, "bench": cmd_bench, "trace": cmd_trace}[args.verb](cfg)
    except (ConfigError, DimensionError, MatrixMarketError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentAbort as exc:
        print(f"numerical abort (seed {exc.seed}, {exc.algo}): {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
