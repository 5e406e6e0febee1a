"""Command-line front end.

Subcommands: ``train`` (one solve), ``benchmark`` (run a JSON plan),
``weights`` (print a resolved weight vector), ``oracle`` (cross-check the
block-merge solver against the grid reference on a random instance).
Exit codes: 0 success, 1 solver failure, 2 usage errors.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import sys
from pathlib import Path

import numpy as np

from . import data_io, weights as wgt
from .admm import (
    GammaSchedule,
    SolverConfig,
    admm_solve,
    sadmm_solve,
    theory_mode_config,
    write_trace_csv,
)
from .errors import RankAdmmError
from .harness import (
    BenchmarkPlan,
    regularizer_from_dict,
    run_benchmark,
    schedule_from_string,
)
from .losses import LossKind
from .metrics import accuracy, predict
from .oracle import chain_objective_reference, grid_dp_chain
from .pava import solve_z_subproblem
from .problem import Problem
from .weights import resolve


def _add_scheme_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", default=None,
                   help="erm|superquantile|extremile|esrm|human-aligned|cpt|aorr")
    p.add_argument("--q", type=float, default=None, help="superquantile level in [0,1)")
    p.add_argument("--order", type=float, default=None, help="extremile order >= 1")
    p.add_argument("--risk", type=float, default=None, help="esrm risk > 0")
    p.add_argument("--ha-a", type=float, default=0.4, dest="ha_a")
    p.add_argument("--ha-b", type=float, default=0.6, dest="ha_b")
    p.add_argument("--k", type=int, default=None, help="ranked-range upper index")
    p.add_argument("--m", type=int, default=None, help="ranked-range lower index")
    p.add_argument("--cpt-gamma", type=float, default=0.61, dest="cpt_gamma")
    p.add_argument("--cpt-delta", type=float, default=0.69, dest="cpt_delta")
    p.add_argument("--cpt-b", type=float, default=-5.0, dest="cpt_b")


def _scheme_from_args(args, parser: argparse.ArgumentParser) -> wgt.WeightScheme:
    name = args.scheme
    if name is None:
        framework = getattr(args, "framework", None)
        if framework == "aorr":
            name = "aorr"
        elif framework == "ehrm":
            name = "cpt"
        elif args.q is not None:
            name = "superquantile"
        else:
            name = "erm"
    try:
        if name == "erm":
            return wgt.ERM()
        if name == "superquantile":
            if args.q is None:
                parser.error("superquantile needs --q")
            return wgt.Superquantile(q=args.q)
        if name == "extremile":
            if args.order is None:
                parser.error("extremile needs --order")
            return wgt.Extremile(order=args.order)
        if name == "esrm":
            if args.risk is None:
                parser.error("esrm needs --risk")
            return wgt.ESRM(risk=args.risk)
        if name == "human-aligned":
            return wgt.HumanAligned(a=args.ha_a, b=args.ha_b)
        if name == "cpt":
            return wgt.CPTValueDependent(gamma=args.cpt_gamma, delta=args.cpt_delta, B=args.cpt_b)
        if name == "aorr":
            if args.k is None or args.m is None:
                parser.error("aorr needs --k and --m")
            return wgt.AoRR(k=args.k, m=args.m)
    except RankAdmmError as exc:
        parser.error(str(exc))
    parser.error(f"unknown scheme {name!r}")


_FRAMEWORK_DEFAULTS = {
    "srm": {"schedule": "srm", "reg": "l2", "mu": 1e-2},
    "aorr": {"schedule": "aorr", "reg": "l2", "mu": 1e-4},
    "ehrm": {"schedule": "ehrm", "reg": "l2", "mu": 1e-2},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankadmm")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one solve and report objective/accuracy")
    train.add_argument("--data", default=None, help="csv or libsvm file (bundled demo when omitted)")
    train.add_argument("--synthetic", default=None,
                       help="n=...,d=...[,sep=...][,flip=...] generates data instead of --data")
    train.add_argument("--framework", choices=("srm", "aorr", "ehrm"), default=None)
    train.add_argument("--loss", choices=("logistic", "hinge"), default="logistic")
    train.add_argument("--reg", choices=("zero", "l1", "l2", "mcp", "scad"), default=None)
    train.add_argument("--mu", type=float, default=None)
    train.add_argument("--theta", type=float, default=4.0)
    _add_scheme_flags(train)
    train.add_argument("--schedule", default=None, help="srm|aorr|ehrm|constant:<rho>")
    train.add_argument("--max-iter", type=int, default=300, dest="max_iter")
    train.add_argument("--eps", type=float, default=1e-6)
    train.add_argument("--r", type=float, default=1.0)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--smooth", action="store_true", help="use the smoothed variant")
    train.add_argument("--theory-mode", action="store_true", dest="theory_mode")
    train.add_argument("--theory-eps", type=float, default=1e-2, dest="theory_eps")
    train.add_argument("--out", default=None, help="directory for the trace csv")
    train.add_argument("--no-timing", action="store_true", dest="no_timing",
                       help="zero the wall_ns trace column for reproducible files")

    bench = sub.add_parser("benchmark", help="run a JSON plan file")
    bench.add_argument("plan", help="path to the plan JSON")
    bench.add_argument("--out", default=None)

    weights_p = sub.add_parser("weights", help="print a resolved weight vector as CSV")
    weights_p.add_argument("--n", type=int, required=True)
    _add_scheme_flags(weights_p)

    oracle_p = sub.add_parser("oracle", help="grid reference vs block solver on random data")
    oracle_p.add_argument("--n", type=int, default=6)
    oracle_p.add_argument("--rho", type=float, default=1.0)
    oracle_p.add_argument("--loss", choices=("logistic", "hinge"), default="logistic")
    oracle_p.add_argument("--seed", type=int, default=0)
    oracle_p.add_argument("--step", type=float, default=1e-4)
    _add_scheme_flags(oracle_p)
    return parser


def _parse_synthetic(text: str, parser) -> data_io.SyntheticSpec:
    params = {}
    mapping = {"n": "n", "d": "d", "sep": "class_sep", "flip": "flip_fraction",
               "seed": "seed", "informative": "informative_fraction"}
    for item in text.split(","):
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in mapping:
            parser.error(f"unknown synthetic parameter {key!r}")
        params[mapping[key]] = float(value) if key not in ("n", "d", "seed") else int(value)
    if "n" not in params or "d" not in params:
        parser.error("--synthetic needs at least n=...,d=...")
    return data_io.SyntheticSpec(**params)


def _cmd_train(args, parser) -> int:
    framework = args.framework
    defaults = _FRAMEWORK_DEFAULTS.get(framework, {})
    reg_variant = args.reg if args.reg is not None else defaults.get("reg", "zero")
    mu = args.mu if args.mu is not None else defaults.get("mu", 1e-2)
    schedule_name = args.schedule if args.schedule is not None else defaults.get("schedule", "srm")

    if args.q is not None and not (0.0 <= args.q < 1.0):
        parser.error(f"--q must be in [0, 1), got {args.q}")

    if args.synthetic:
        ds = data_io.generate_synthetic(_parse_synthetic(args.synthetic, parser))
    elif args.data:
        path = args.data
        ds = data_io.load_csv(path) if str(path).endswith(".csv") else data_io.load_libsvm(path)
    else:
        ref = importlib.resources.files("rankadmm").joinpath("assets/tiny.csv")
        with importlib.resources.as_file(ref) as p:
            ds = data_io.load_csv(p)

    scheme = _scheme_from_args(args, parser)
    reg = regularizer_from_dict({"variant": reg_variant, "mu": mu, "theta": args.theta})
    problem = Problem(X=ds.X, y=ds.y, loss=LossKind(args.loss), weights=scheme, regularizer=reg)

    if args.theory_mode:
        config = theory_mode_config(problem, eps=args.theory_eps, seed=args.seed)
        config = SolverConfig(
            max_iter=args.max_iter,
            rho_schedule=config.rho_schedule,
            r=config.r,
            gamma_schedule=config.gamma_schedule,
            stop_eps=args.eps,
            seed=args.seed,
        )
        use_smooth = True
    else:
        config = SolverConfig(
            max_iter=args.max_iter,
            rho_schedule=schedule_from_string(schedule_name),
            r=args.r,
            gamma_schedule=GammaSchedule.default(),
            stop_eps=args.eps,
            seed=args.seed,
        )
        use_smooth = args.smooth

    result = (sadmm_solve if use_smooth else admm_solve)(problem, config)
    obj = problem.objective(result.w)
    acc = accuracy(predict(problem.X, result.w), problem.y)
    print(f"objective: {obj:.6f}")
    print(f"train_accuracy: {acc:.4f}")
    print(f"iterations: {len(result.trace)}  converged: {result.converged}")
    out_dir = Path(args.out) if args.out else Path.cwd()
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    write_trace_csv(result.trace, trace_path, include_wall=not args.no_timing)
    print(f"trace: {trace_path}")
    return 0


def _cmd_benchmark(args, parser) -> int:
    plan = BenchmarkPlan.from_json(args.plan)
    out = run_benchmark(plan, out_dir=args.out)
    failures = sum(r["failures"] for r in out["summary"])
    for row in out["summary"]:
        print(
            f"{row['cell']} [{row['solver']}] objective "
            f"{row['objective_mean']:.6f} ({row['objective_std']:.6f}) "
            f"accuracy {row['accuracy_mean']:.4f}"
        )
    return 1 if failures else 0


def _cmd_weights(args, parser) -> int:
    scheme = _scheme_from_args(args, parser)
    resolved = resolve(scheme, args.n)
    if resolved.is_value_dependent:
        low = ",".join(format(v, ".12g") for v in resolved.sigma_low)
        high = ",".join(format(v, ".12g") for v in resolved.sigma_high)
        print(f"low:{low}")
        print(f"high:{high}")
    else:
        print(",".join(format(v, ".12g") for v in resolved.sigma))
    return 0


def _cmd_oracle(args, parser) -> int:
    scheme = _scheme_from_args(args, parser)
    resolved = resolve(scheme, args.n)
    rng = np.random.default_rng(args.seed)
    m = rng.standard_normal(args.n)
    kind = LossKind(args.loss)
    z = solve_z_subproblem(m, resolved, args.rho, kind)
    z_ref, obj_ref = grid_dp_chain(m, resolved, args.rho, kind, step=args.step)
    obj = chain_objective_reference(z, m, resolved, args.rho, kind)
    print(f"block_solver_objective: {obj:.10f}")
    print(f"grid_reference_objective: {obj_ref:.10f}")
    print(f"gap: {obj - obj_ref:.3e}")
    return 0


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "train":
            return _cmd_train(args, parser)
        if args.command == "benchmark":
            return _cmd_benchmark(args, parser)
        if args.command == "weights":
            return _cmd_weights(args, parser)
        if args.command == "oracle":
            return _cmd_oracle(args, parser)
    except SystemExit as exc:  # parser.error inside command handlers
        return int(exc.code or 0)
    except RankAdmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
