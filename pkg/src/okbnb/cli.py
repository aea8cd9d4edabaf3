"""Command-line front end: ``okbnb solve | bench | discover``.

Reports go to stdout (or ``--out``); the exit code is the only status
channel: 0 solved (Optimal/GapReached), 1 internal error, 2 bad input,
3 infeasible configuration, 4 time limit hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from .bnb import BnBResult, Status, solve
from .core import InfeasibleConfigError, SolverConfig, build_problem
from .datagen import MAX_ORACLE_SUPPORTS, SyntheticSpec, brute_force_optimum, generate, recovery_metrics
from .ode import SYSTEMS, DivergenceError, discover, integrate

EXIT_OK, EXIT_INTERNAL, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_TIMELIMIT = 0, 1, 2, 3, 4

log = logging.getLogger("okbnb")


class InputError(ValueError):
    """Malformed input file or flag value; maps to exit code 2."""


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    """Replace non-finite floats so the report is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _finite_or_none(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def read_csv_matrix(path: str) -> np.ndarray:
    """Dense numeric CSV without header; errors name the offending row."""
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    with fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise InputError(f"{path}: row {i}: {exc}") from exc
            if rows and len(vals) != len(rows[0]):
                raise InputError(f"{path}: row {i}: expected {len(rows[0])} columns, got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: row {i}: non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _write(text: str, out: str | None) -> None:
    if out and out != "-":
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _status_code(status: Status) -> int:
    return EXIT_TIMELIMIT if status is Status.TIME_LIMIT else EXIT_OK


def result_fields(res: BnBResult, yty: float) -> dict:
    return {
        "status": res.status.value,
        "loss": res.upper,
        "rss": res.upper + yty,
        "support": [int(j) for j in res.best.support],
        "coeffs": [float(c) for c in res.best.coeffs],
        "lower_bound": res.lower,
        "gap": res.gap,
        "nodes": res.nodes_processed,
        "nodes_pruned": res.nodes_pruned,
        "elapsed_s": res.elapsed_s,
    }


def _config(args, *names) -> dict:
    return {n: getattr(args, n) for n in names}


def cmd_solve(args) -> int:
    X = read_csv_matrix(args.x)
    y = read_csv_matrix(args.y)
    if y.shape[1] != 1:
        raise InputError(f"{args.y}: expected one value per line, got {y.shape[1]} columns")
    y = y[:, 0]
    if y.size != X.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but y has {y.size} values")
    cfg = SolverConfig(k=args.k, lambda2=args.lambda2, gap_tol=args.gap_tol,
                       time_limit_s=args.time_limit_s, beam_width=args.beam_width, use_admm=not args.no_admm)
    pd = build_problem(X, y)
    res = solve(pd, cfg)
    report = {
        "command": "solve",
        "version": __version__,
        "config": _config(args, "k", "lambda2", "gap_tol", "time_limit_s", "beam_width") | {"use_admm": cfg.use_admm},
        "seeds": [],
        "n": pd.n,
        "p": pd.p,
        **result_fields(res, pd.yty),
    }
    _write(json.dumps(_clean(report), indent=2) + "\n", args.out)
    return _status_code(res.status)


BENCH_COLUMNS = ("p", "rho", "seed", "loss", "gap", "time", "tpr", "oracle_match")


def _bench_row(n, p, rho, seed, args):
    spec = SyntheticSpec(n=n, p=p, k_true=args.k, rho=rho, snr=args.snr, seed=seed)
    X, y, beta = generate(spec)
    pd = build_problem(X, y)
    cfg = SolverConfig(k=args.k, lambda2=args.lambda2, gap_tol=args.gap_tol, time_limit_s=args.time_limit_s)
    res = solve(pd, cfg)
    tpr, _ = recovery_metrics(res.best, beta)
    match = ""
    if args.oracle and math.comb(p, args.k) <= MAX_ORACLE_SUPPORTS:
        opt = brute_force_optimum(pd, cfg).loss
        match = "true" if abs(res.upper - opt) <= 1e-8 * max(1.0, abs(opt)) else "false"
    row = (p, rho, seed, repr(res.upper), repr(res.gap), f"{res.elapsed_s:.6f}", repr(tpr), match)
    return row, res.status


def _threads() -> int:
    raw = os.environ.get("OKBNB_THREADS", "0")
    try:
        val = int(raw)
    except ValueError as exc:
        raise InputError(f"OKBNB_THREADS must be an integer, got {raw!r}") from exc
    if val < 0:
        raise InputError("OKBNB_THREADS must be >= 0")
    return val


def cmd_bench(args) -> int:
    if args.k < 1:
        raise InfeasibleConfigError(f"k must be a positive integer, got {args.k}")
    for rho in args.rho_list:
        if not 0 <= rho < 1:
            raise InputError(f"rho must lie in [0, 1), got {rho}")
    for p in args.p_list:
        if p < args.k:
            raise InputError(f"p={p} must be at least k={args.k}")
    if args.n < 1 or args.snr <= 0:
        raise InputError("need n >= 1 and snr > 0")
    jobs = [(args.n, p, rho, s, args) for p in args.p_list for rho in args.rho_list for s in args.seeds]
    threads = _threads()
    if threads > 0:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: _bench_row(*j), jobs))
    else:
        results = [_bench_row(*j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for row, _ in results:
        w.writerow(row)
    _write(buf.getvalue(), args.out)
    return EXIT_TIMELIMIT if any(st is Status.TIME_LIMIT for _, st in results) else EXIT_OK


def cmd_discover(args) -> int:
    if args.duration_s <= 0 or args.dt <= 0 or args.duration_s < args.dt:
        raise InputError("need dt > 0 and duration-s >= dt")
    if args.noise < 0 or args.degree < 0:
        raise InputError("noise and degree must be non-negative")
    system = SYSTEMS[args.system]()
    rng = np.random.default_rng(args.seed)
    x0 = np.array(args.x0, dtype=float) if args.x0 else system.sample_x0(rng)
    if x0.size != system.dim:
        raise InputError(f"--x0 needs {system.dim} values for {system.name}")
    traj = integrate(system, x0, args.duration_s, args.dt, args.noise, rng)
    if not np.all(np.isfinite(traj.derivatives)):
        raise InputError("trajectory too short for the derivative window")
    res = discover(traj, system, degree=args.degree, k_grid=args.k_grid, lambda_grid=args.lambda_grid,
                   time_limit_per_fit=args.time_limit_s, n_eval_sims=args.eval_sims, seed=args.seed)
    dims = []
    for d in res.dims:
        sel = d.selected
        dims.append({
            "dim": d.dim,
            "k": sel.k if sel else None,
            "lambda2": sel.lambda2 if sel else None,
            "status": sel.status if sel else "Failed",
            "support": sel.support if sel else [],
            "terms": [res.names[j] for j in sel.support] if sel else [],
            "coeffs": sel.coeffs if sel else [],
            "tpr": d.tpr,
            "l2_err": d.l2_err,
            "true_sparsity": d.true_sparsity,
        })
    report = {
        "command": "discover",
        "version": __version__,
        "config": _config(args, "system", "duration_s", "dt", "noise", "degree", "k_grid", "lambda_grid",
                          "time_limit_s", "eval_sims") | {"x0": x0.tolist()},
        "seeds": [args.seed],
        "system": res.system,
        "library_size": res.library_size,
        "library": res.names,
        "n_train": res.n_train,
        "n_val": res.n_val,
        "dims": dims,
        "tpr": res.tpr,
        "l2_err": res.l2_err,
        "rmse": res.rmse,
        "scoreboard": [asdict(c) for c in res.cells],
    }
    _write(json.dumps(_clean(report), indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="okbnb", description="Certifiably optimal k-sparse ridge regression.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one problem read from CSV files")
    p.add_argument("--x", required=True, help="feature matrix CSV, one sample per row")
    p.add_argument("--y", required=True, help="response CSV, one value per line")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--gap-tol", type=float, default=1e-4)
    p.add_argument("--time-limit-s", type=float, default=None)
    p.add_argument("--beam-width", type=int, default=50)
    p.add_argument("--no-admm", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run the synthetic benchmark grid")
    b.add_argument("--n", type=int, default=500)
    b.add_argument("--p-list", type=_int_list, default=[50, 100, 200])
    b.add_argument("--rho-list", type=_float_list, default=[0.1, 0.5])
    b.add_argument("--k", type=int, default=5)
    b.add_argument("--snr", type=float, default=5.0)
    b.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    b.add_argument("--lambda2", type=float, default=1e-3)
    b.add_argument("--gap-tol", type=float, default=1e-4)
    b.add_argument("--time-limit-s", type=float, default=None)
    b.add_argument("--oracle", action="store_true", help="compare against exhaustive search when feasible")
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("discover", help="recover a polynomial ODE from a simulated trajectory")
    d.add_argument("--system", choices=sorted(SYSTEMS), required=True)
    d.add_argument("--duration-s", type=float, default=10.0)
    d.add_argument("--dt", type=float, default=0.002)
    d.add_argument("--noise", type=float, default=0.002)
    d.add_argument("--degree", type=int, default=5)
    d.add_argument("--k-grid", type=_int_list, default=[1, 2, 3, 4, 5])
    d.add_argument("--lambda-grid", type=_float_list, default=[1e-5, 1e-3, 1e-2, 0.05, 0.2])
    d.add_argument("--time-limit-s", type=float, default=30.0, help="limit per (k, lambda2) fit")
    d.add_argument("--eval-sims", type=int, default=10)
    d.add_argument("--x0", type=_float_list, default=None, help="initial state; random from --seed if omitted")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default="-")
    d.set_defaults(func=cmd_discover)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"okbnb: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleConfigError as exc:
        print(f"okbnb: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"okbnb: integration diverged: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"okbnb: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
