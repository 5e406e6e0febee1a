"""Benchmark orchestration: JSON plans, repeated seeded runs, summaries.

A plan is a list of cells; each cell names a dataset, a weight scheme, a
loss, a regularizer, a solver, and how many seeded repetitions to run.
Every run writes a trace CSV; the harness then writes a summary table
(mean and sample deviation of objective, accuracy, and time) plus
sub-optimality traces measured against the best final objective seen for
the same underlying problem.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data_io, weights as wgt
from .admm import (
    GammaSchedule,
    ScheduleSpec,
    SolverConfig,
    admm_solve,
    sadmm_solve,
    write_trace_csv,
)
from .baselines import SgdConfig, sgd_solve
from .errors import InvalidParameterError, RankAdmmError
from .losses import LossKind
from .metrics import accuracy, predict
from .problem import Problem
from .regularizers import RegularizerSpec

logger = logging.getLogger(__name__)

THREADS_ENV = "RANK_ADMM_THREADS"

SUMMARY_COLUMNS = (
    "cell",
    "solver",
    "runs",
    "failures",
    "objective_mean",
    "objective_std",
    "accuracy_mean",
    "accuracy_std",
    "time_s_mean",
    "time_s_std",
)


def scheme_from_dict(d: dict) -> wgt.WeightScheme:
    kind = d.get("kind", "erm")
    if kind == "erm":
        return wgt.ERM()
    if kind == "superquantile":
        return wgt.Superquantile(q=float(d["q"]))
    if kind == "extremile":
        return wgt.Extremile(order=float(d["order"]))
    if kind == "esrm":
        return wgt.ESRM(risk=float(d["risk"]))
    if kind == "human_aligned":
        return wgt.HumanAligned(a=float(d["a"]), b=float(d["b"]))
    if kind == "cpt":
        return wgt.CPTValueDependent(
            gamma=float(d.get("gamma", 0.61)),
            delta=float(d.get("delta", 0.69)),
            B=float(d.get("B", -5.0)),
        )
    if kind == "aorr":
        return wgt.AoRR(k=int(d["k"]), m=int(d["m"]))
    if kind == "explicit":
        return wgt.Explicit(d["sigma"])
    raise InvalidParameterError(f"unknown scheme kind {kind!r}")


def regularizer_from_dict(d: dict) -> RegularizerSpec:
    return RegularizerSpec(
        d.get("variant", "zero"), mu=float(d.get("mu", 0.0)), theta=float(d.get("theta", 0.0))
    )


def schedule_from_string(s: str) -> ScheduleSpec:
    if s.startswith("constant:"):
        return ScheduleSpec.constant(float(s.split(":", 1)[1]))
    if s == "srm":
        return ScheduleSpec.srm()
    if s == "aorr":
        return ScheduleSpec.aorr()
    if s == "ehrm":
        return ScheduleSpec.ehrm()
    raise InvalidParameterError(f"unknown schedule {s!r} (srm|aorr|ehrm|constant:<rho>)")


@dataclass
class BenchmarkCell:
    name: str
    dataset: dict
    scheme: dict = field(default_factory=lambda: {"kind": "erm"})
    loss: str = "logistic"
    regularizer: dict = field(default_factory=lambda: {"variant": "zero"})
    solver: str = "admm"
    config: dict = field(default_factory=dict)
    split: dict | None = None
    repetitions: int = 1
    seeds: list[int] | None = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise InvalidParameterError("repetitions must be >= 1")
        if self.solver not in ("admm", "sadmm", "sgd"):
            raise InvalidParameterError(f"unknown solver {self.solver!r}")

    def run_seeds(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return list(range(self.repetitions))

    def problem_key(self) -> str:
        """Cells with the same key share an F* for sub-optimality."""
        return json.dumps(
            {
                "dataset": self.dataset,
                "scheme": self.scheme,
                "loss": self.loss,
                "regularizer": self.regularizer,
                "split": self.split,
            },
            sort_keys=True,
        )


@dataclass
class BenchmarkPlan:
    cells: list[BenchmarkCell]
    out: str = "benchmark_out"

    @staticmethod
    def from_json(path) -> "BenchmarkPlan":
        with open(path) as fh:
            raw = json.load(fh)
        cells = [BenchmarkCell(**c) for c in raw["cells"]]
        return BenchmarkPlan(cells=cells, out=raw.get("out", "benchmark_out"))


@dataclass
class RunRecord:
    cell: str
    solver: str
    seed: int
    objective: float
    accuracy: float
    time_s: float
    trace_path: str
    error: str | None = None


def _load_dataset(spec: dict, seed: int) -> data_io.RawDataset:
    if "path" in spec:
        path = spec["path"]
        fmt = spec.get("format") or ("csv" if str(path).endswith(".csv") else "libsvm")
        return data_io.load_csv(path) if fmt == "csv" else data_io.load_libsvm(path)
    if "synthetic" in spec:
        params = dict(spec["synthetic"])
        params.setdefault("seed", seed)
        return data_io.generate_synthetic(data_io.SyntheticSpec(**params))
    raise InvalidParameterError("dataset spec needs 'path' or 'synthetic'")


def _build_problem(cell: BenchmarkCell, seed: int):
    ds = _load_dataset(cell.dataset, seed)
    test = None
    if cell.split:
        fr = cell.split.get("fractions", [0.6, 0.4])
        parts = data_io.split(ds, tuple(fr), seed=cell.split.get("seed", seed))
        if len(parts) >= 2:
            parts = data_io.standardize(parts[0], *parts[1:])
            ds, test = parts[0], parts[1]
        else:
            ds = data_io.standardize(parts[0])[0]
    problem = Problem(
        X=ds.X,
        y=ds.y,
        loss=LossKind(cell.loss),
        weights=scheme_from_dict(cell.scheme),
        regularizer=regularizer_from_dict(cell.regularizer),
    )
    return problem, test


def _solver_config(cell: BenchmarkCell, seed: int) -> SolverConfig:
    cfg = cell.config
    schedule = schedule_from_string(cfg.get("schedule", "srm"))
    gamma = cfg.get("gamma")
    return SolverConfig(
        max_iter=int(cfg.get("max_iter", 300)),
        rho_schedule=schedule,
        r=float(cfg.get("r", 1.0)),
        gamma_schedule=(
            GammaSchedule.constant(float(gamma)) if gamma else GammaSchedule.default()
        ),
        stop_eps=float(cfg.get("eps", 1e-6)),
        seed=seed,
        wall_budget_s=cfg.get("wall_budget_s"),
    )


def run_cell(cell: BenchmarkCell, seed: int, out_dir: Path, include_wall: bool = True) -> RunRecord:
    trace_path = out_dir / f"{cell.name}_{cell.solver}_seed{seed}.csv"
    try:
        problem, test = _build_problem(cell, seed)
        if cell.solver == "sgd":
            sgd_cfg = SgdConfig(
                learning_rate=float(cell.config.get("learning_rate", 1e-3)),
                batch=cell.config.get("batch", 64),
                epochs=int(cell.config.get("epochs", 2000)),
                seed=seed,
                wall_budget_s=cell.config.get("wall_budget_s"),
            )
            w, trace = sgd_solve(problem, sgd_cfg)
        else:
            solve = sadmm_solve if cell.solver == "sadmm" else admm_solve
            result = solve(problem, _solver_config(cell, seed))
            w, trace = result.w, result.trace
        write_trace_csv(trace, trace_path, include_wall=include_wall)
        eval_ds = test if test is not None else None
        if eval_ds is not None:
            acc = accuracy(predict(eval_ds.X, w), eval_ds.y)
        else:
            acc = accuracy(predict(problem.X, w), problem.y)
        return RunRecord(
            cell=cell.name,
            solver=cell.solver,
            seed=seed,
            objective=problem.objective(w),
            accuracy=acc,
            time_s=trace[-1].wall_ns / 1e9 if trace else 0.0,
            trace_path=str(trace_path),
        )
    except RankAdmmError as exc:
        logger.error("cell %s seed %d failed: %s", cell.name, seed, exc)
        return RunRecord(
            cell=cell.name,
            solver=cell.solver,
            seed=seed,
            objective=float("nan"),
            accuracy=float("nan"),
            time_s=float("nan"),
            trace_path=str(trace_path),
            error=str(exc),
        )


def run_benchmark(plan: BenchmarkPlan, out_dir=None, include_wall: bool = True) -> dict:
    """Execute every (cell, seed) pair in a bounded worker pool.

    Returns {"records": [...], "summary": [...]} and writes summary.csv
    plus per-run sub-optimality CSVs under the output directory.
    """
    out = Path(out_dir if out_dir is not None else plan.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = int(os.environ.get(THREADS_ENV, os.cpu_count() or 1))
    tasks = [(cell, seed) for cell in plan.cells for seed in cell.run_seeds()]
    records: list[RunRecord] = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(run_cell, cell, seed, out, include_wall) for cell, seed in tasks]
        records = [f.result() for f in futures]

    summary = summarize(plan, records)
    _write_summary_csv(out / "summary.csv", summary)
    _write_suboptimality(plan, records, out)
    return {"records": records, "summary": summary}


def summarize(plan: BenchmarkPlan, records: list[RunRecord]) -> list[dict]:
    """Per (cell, solver): mean and sample standard deviation (n-1)."""
    summary = []
    for cell in plan.cells:
        rows = [r for r in records if r.cell == cell.name and r.solver == cell.solver]
        ok = [r for r in rows if r.error is None]

        def stats(vals):
            if not vals:
                return float("nan"), float("nan")
            if len(vals) == 1:
                return vals[0], 0.0
            return statistics.fmean(vals), statistics.stdev(vals)

        obj_m, obj_s = stats([r.objective for r in ok])
        acc_m, acc_s = stats([r.accuracy for r in ok])
        t_m, t_s = stats([r.time_s for r in ok])
        summary.append(
            {
                "cell": cell.name,
                "solver": cell.solver,
                "runs": len(rows),
                "failures": len(rows) - len(ok),
                "objective_mean": obj_m,
                "objective_std": obj_s,
                "accuracy_mean": acc_m,
                "accuracy_std": acc_s,
                "time_s_mean": t_m,
                "time_s_std": t_s,
            }
        )
    return summary


def _write_summary_csv(path: Path, summary: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in summary:
            fh.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in SUMMARY_COLUMNS) + "\n")


def _write_suboptimality(plan: BenchmarkPlan, records: list[RunRecord], out: Path) -> None:
    """F^k - F* per run, F* being the best final objective over all runs
    that share the cell's problem key."""
    from .admm import read_trace_csv

    best: dict[str, float] = {}
    key_of = {cell.name: cell.problem_key() for cell in plan.cells}
    for rec in records:
        if rec.error is not None or not np.isfinite(rec.objective):
            continue
        key = key_of[rec.cell]
        best[key] = min(best.get(key, np.inf), rec.objective)
    for rec in records:
        if rec.error is not None:
            continue
        key = key_of[rec.cell]
        if key not in best:
            continue
        fstar = best[key]
        trace = read_trace_csv(rec.trace_path)
        sub_path = Path(rec.trace_path).with_name(Path(rec.trace_path).stem + "_subopt.csv")
        with open(sub_path, "w") as fh:
            fh.write("k,wall_ns,suboptimality\n")
            for row in trace:
                fh.write(f"{row.k},{row.wall_ns},{max(row.objective - fstar, 0.0)!r}\n")
