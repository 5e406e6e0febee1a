"""Rank-weighted subgradient descent baseline.

A plain fixed-step subgradient method over shuffled minibatches.  Each
batch is treated as its own smaller problem: the weight scheme is
re-resolved at the batch size, which is the usual practice for these
comparators but introduces bias for non-uniform schemes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import weights as wgt
from .admm import IterationTrace
from .errors import InvalidParameterError
from .losses import loss_derivative_vec
from .problem import Problem
from .regularizers import reg_subgradient


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 1e-3
    batch: int | None = 64
    epochs: int = 2000
    seed: int = 0
    wall_budget_s: float | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InvalidParameterError("learning rate must be >= 0")
        if self.epochs < 1:
            raise InvalidParameterError("epochs must be >= 1")
        if self.batch is not None and self.batch < 1:
            raise InvalidParameterError("batch must be >= 1 or None for full batch")


def rank_subgradient(
    problem: Problem, w: np.ndarray, batch_indices: np.ndarray
) -> np.ndarray:
    """Subgradient of the batch rank-weighted loss plus the penalty.

    Sorts the batch margins, resolves batch-sized weights, scatters them
    back to sample positions, and chains through the data operator.
    """
    idx = np.asarray(batch_indices)
    if idx.size == 0:
        raise InvalidParameterError("batch must be nonempty")
    Xb = problem.X[idx]
    yb = problem.y[idx]
    zb = Xb @ w
    zb = -yb * (np.asarray(zb).ravel())
    nb = idx.size

    resolved = wgt.resolve(problem.weights, nb)
    order = np.argsort(zb, kind="stable")
    sigma_sorted = resolved.sigma_for(zb[order])
    weight = np.empty(nb)
    weight[order] = sigma_sorted

    deriv = loss_derivative_vec(problem.loss, zb)
    pull = -yb * (weight * deriv)
    grad = Xb.T @ pull
    return np.asarray(grad).ravel() + reg_subgradient(problem.regularizer, w)


def sgd_solve(problem: Problem, config: SgdConfig) -> tuple[np.ndarray, list[IterationTrace]]:
    """Fixed-step subgradient descent over shuffled batches.

    One trace row per epoch with the full objective; the stationarity
    columns stay at zero since the method does not estimate them.
    """
    rng = np.random.default_rng(config.seed)
    n = problem.n
    w = np.zeros(problem.d)
    batch = n if config.batch is None else min(config.batch, n)
    trace: list[IterationTrace] = []
    start = time.perf_counter_ns()
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, batch):
            idx = perm[lo : lo + batch]
            g = rank_subgradient(problem, w, idx)
            w = w - config.learning_rate * g
        trace.append(
            IterationTrace(
                k=epoch,
                objective=problem.objective(w),
                aug_lagrangian=float("nan"),
                lyapunov=None,
                kkt_z=0.0,
                kkt_w=0.0,
                kkt_feas=0.0,
                dual_step=0.0,
                z_decrease=0.0,
                w_decrease=0.0,
                rho=0.0,
                gamma=None,
                wall_ns=time.perf_counter_ns() - start,
            )
        )
        if (
            config.wall_budget_s is not None
            and (time.perf_counter_ns() - start) / 1e9 >= config.wall_budget_s
        ):
            break
    return w, trace
