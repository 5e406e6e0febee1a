"""Chain-constrained minimization of separable rank-weighted objectives.

Solves, after sorting the targets m ascending,

    min_z  sum_i sigma_i * l(z_i) + (rho/2) (z_i - m_i)^2
    s.t.   z_1 <= z_2 <= ... <= z_n

by pool-adjacent-violators block merging.  The refined merge loop folds a
whole run of strictly decreasing block values into one block with a single
scalar solve; the merged value always lands between the run's last and
first values, which is what makes the multi-merge safe.  A fast path for
one-contiguous-run weight patterns (ranked-range / top-k) only inspects
blocks adjacent to the positive-weight run, and a two-piece variant
handles the value-dependent prospect-theory weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .losses import (
    BlockObjective,
    LossKind,
    block_minimize,
    block_minimize_cpt,
    block_stationarity_residual,
    block_stationarity_residual_cpt,
)
from .weights import ResolvedWeights

#: Optional slack when comparing adjacent block values.  0 keeps the
#: comparison exact; block values come from deterministic scalar solves.
ORDER_SLACK = 0.0


@dataclass(frozen=True)
class Block:
    """Consecutive index range [lo, hi] (0-based, inclusive) in the sorted
    order, its current optimal value, and its aggregated sums."""

    lo: int
    hi: int
    value: float
    s_sum: float
    m_sum: float
    s_low_sum: float = 0.0
    s_high_sum: float = 0.0

    @property
    def count(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True)
class MergeEvent:
    """One merge: value of the run's first (largest) and last (smallest)
    blocks and the recomputed merged value."""

    lo: int
    hi: int
    v_first: float
    v_last: float
    v_merged: float


@dataclass
class BlockPartition:
    """Ordered blocks covering 0..n-1 with no gaps or overlaps."""

    blocks: list[Block]
    n: int

    def values(self) -> np.ndarray:
        """Expand block values to a length-n vector in sorted order."""
        out = np.empty(self.n)
        for b in self.blocks:
            out[b.lo : b.hi + 1] = b.value
        return out

    def is_isotonic(self) -> bool:
        vals = [b.value for b in self.blocks]
        return all(vals[i] <= vals[i + 1] for i in range(len(vals) - 1))

    def index_ranges(self) -> list[tuple[int, int]]:
        return [(b.lo, b.hi) for b in self.blocks]


def _singleton(i: int, sigma_i: float, m_i: float, rho: float, kind: LossKind) -> Block:
    v = block_minimize(BlockObjective(sigma_i, 1, m_i, rho), kind)
    return Block(i, i, v, sigma_i, m_i)


def _merge_run(
    blocks: list[Block],
    i: int,
    j: int,
    rho: float,
    kind: LossKind,
    merge_log: list[MergeEvent] | None,
) -> Block:
    """Fold blocks[i..j] (strictly decreasing values) into one block."""
    s_sum = 0.0
    m_sum = 0.0
    for b in blocks[i : j + 1]:
        s_sum += b.s_sum
        m_sum += b.m_sum
    lo, hi = blocks[i].lo, blocks[j].hi
    count = hi - lo + 1
    v = block_minimize(BlockObjective(s_sum, count, m_sum, rho), kind)
    if merge_log is not None:
        merge_log.append(MergeEvent(lo, hi, blocks[i].value, blocks[j].value, v))
    return Block(lo, hi, v, s_sum, m_sum)


def pava_run(
    sigma: np.ndarray,
    m_sorted: np.ndarray,
    rho: float,
    kind: LossKind,
    merge_log: list[MergeEvent] | None = None,
) -> BlockPartition:
    """Refined merge loop for constant (rank-indexed) weights.

    Scans left to right; on a violation it extends the run while block
    values keep strictly decreasing, merges the whole run with one scalar
    solve, then resumes at the merged block's left neighbor.
    """
    n = len(m_sorted)
    blocks = [_singleton(i, float(sigma[i]), float(m_sorted[i]), rho, kind) for i in range(n)]
    i = 0
    while i < len(blocks) - 1:
        if blocks[i].value > blocks[i + 1].value + ORDER_SLACK:
            j = i + 1
            while j + 1 < len(blocks) and blocks[j].value > blocks[j + 1].value + ORDER_SLACK:
                j += 1
            merged = _merge_run(blocks, i, j, rho, kind, merge_log)
            blocks[i : j + 1] = [merged]
            i = max(i - 1, 0)
        else:
            i += 1
    return BlockPartition(blocks, n)


def pava_run_classic(
    sigma: np.ndarray,
    m_sorted: np.ndarray,
    rho: float,
    kind: LossKind,
    merge_log: list[MergeEvent] | None = None,
) -> BlockPartition:
    """Textbook variant merging exactly two blocks per scalar solve."""
    n = len(m_sorted)
    blocks = [_singleton(i, float(sigma[i]), float(m_sorted[i]), rho, kind) for i in range(n)]
    i = 0
    while i < len(blocks) - 1:
        if blocks[i].value > blocks[i + 1].value + ORDER_SLACK:
            merged = _merge_run(blocks, i, i + 1, rho, kind, merge_log)
            blocks[i : i + 2] = [merged]
            i = max(i - 1, 0)
        else:
            i += 1
    return BlockPartition(blocks, n)


def is_topk_pattern(sigma: np.ndarray) -> tuple[int, int] | None:
    """Detect one contiguous run of equal positive weights, zeros elsewhere.

    Returns (run_start, run_end) inclusive, or None.
    """
    positive = np.flatnonzero(sigma > 0)
    if positive.size == 0:
        return None
    lo, hi = int(positive[0]), int(positive[-1])
    if hi - lo + 1 != positive.size:
        return None
    run = sigma[lo : hi + 1]
    if not np.all(run == run[0]):
        return None
    return lo, hi


def pava_run_topk_fast(
    sigma: np.ndarray,
    m_sorted: np.ndarray,
    rho: float,
    kind: LossKind,
    merge_log: list[MergeEvent] | None = None,
) -> BlockPartition:
    """Fast path for ranked-range weight patterns.

    A merge requires the mean weight to increase across the boundary, so
    with zeros outside one positive run the only possible violations sit
    at and left of that run: zero-weight singletons are exact quadratics
    (v = m_i, already isotonic) and nothing ever merges across the run's
    right edge.  Falls back to the generic loop if the pattern check or
    the final order check fails.
    """
    pattern = is_topk_pattern(sigma)
    if pattern is None:
        return pava_run(sigma, m_sorted, rho, kind, merge_log)
    lo, hi = pattern
    n = len(m_sorted)
    local_log: list[MergeEvent] = []
    blocks = [Block(i, i, float(m_sorted[i]), 0.0, float(m_sorted[i])) for i in range(lo)]
    for i in range(lo, hi + 1):
        blocks.append(_singleton(i, float(sigma[i]), float(m_sorted[i]), rho, kind))
    i = max(lo - 1, 0)
    while i < len(blocks) - 1:
        if blocks[i].value > blocks[i + 1].value + ORDER_SLACK:
            j = i + 1
            while j + 1 < len(blocks) and blocks[j].value > blocks[j + 1].value + ORDER_SLACK:
                j += 1
            merged = _merge_run(blocks, i, j, rho, kind, local_log)
            blocks[i : j + 1] = [merged]
            i = max(i - 1, 0)
        else:
            i += 1
    for i in range(hi + 1, n):
        blocks.append(Block(i, i, float(m_sorted[i]), 0.0, float(m_sorted[i])))
    partition = BlockPartition(blocks, n)
    if not partition.is_isotonic():
        return pava_run(sigma, m_sorted, rho, kind, merge_log)
    if merge_log is not None:
        merge_log.extend(local_log)
    return partition


def _cpt_singleton(
    i: int, s_low: float, s_high: float, m_i: float, rho: float, B: float, kind: LossKind
) -> Block:
    v = block_minimize_cpt(
        BlockObjective(s_low, 1, m_i, rho),
        BlockObjective(s_high, 1, m_i, rho),
        B,
        kind,
    )
    return Block(i, i, v, 0.0, m_i, s_low, s_high)


def pava_run_cpt(
    sigma_low: np.ndarray,
    sigma_high: np.ndarray,
    m_sorted: np.ndarray,
    rho: float,
    B: float,
    kind: LossKind,
    merge_log: list[MergeEvent] | None = None,
) -> BlockPartition:
    """Merge loop for two-piece value-dependent weights.

    Per-rank weights switch at the reference point B depending on where
    the block value lands, so each block carries both branch weight sums
    and block values come from the two-piece scalar solve.  The result is
    a first-order point, not necessarily a global minimum.
    """
    n = len(m_sorted)
    blocks = [
        _cpt_singleton(
            i, float(sigma_low[i]), float(sigma_high[i]), float(m_sorted[i]), rho, B, kind
        )
        for i in range(n)
    ]
    i = 0
    while i < len(blocks) - 1:
        if blocks[i].value > blocks[i + 1].value + ORDER_SLACK:
            j = i + 1
            while j + 1 < len(blocks) and blocks[j].value > blocks[j + 1].value + ORDER_SLACK:
                j += 1
            s_low = sum(b.s_low_sum for b in blocks[i : j + 1])
            s_high = sum(b.s_high_sum for b in blocks[i : j + 1])
            m_sum = sum(b.m_sum for b in blocks[i : j + 1])
            lo, hi = blocks[i].lo, blocks[j].hi
            count = hi - lo + 1
            v = block_minimize_cpt(
                BlockObjective(s_low, count, m_sum, rho),
                BlockObjective(s_high, count, m_sum, rho),
                B,
                kind,
            )
            if merge_log is not None:
                merge_log.append(MergeEvent(lo, hi, blocks[i].value, blocks[j].value, v))
            blocks[i : j + 1] = [Block(lo, hi, v, 0.0, m_sum, s_low, s_high)]
            i = max(i - 1, 0)
        else:
            i += 1
    return BlockPartition(blocks, n)


def stationarity_residual(
    partition: BlockPartition,
    resolved: ResolvedWeights,
    m_sorted: np.ndarray,
    rho: float,
    kind: LossKind,
) -> float:
    """Max over blocks of the first-order residual at the block value."""
    worst = 0.0
    for b in partition.blocks:
        m_sum = float(np.sum(m_sorted[b.lo : b.hi + 1]))
        if resolved.is_value_dependent:
            s_low = float(np.sum(resolved.sigma_low[b.lo : b.hi + 1]))
            s_high = float(np.sum(resolved.sigma_high[b.lo : b.hi + 1]))
            r = block_stationarity_residual_cpt(
                BlockObjective(s_low, b.count, m_sum, rho),
                BlockObjective(s_high, b.count, m_sum, rho),
                resolved.reference,
                kind,
                b.value,
            )
        else:
            s = float(np.sum(resolved.sigma[b.lo : b.hi + 1]))
            r = block_stationarity_residual(
                BlockObjective(s, b.count, m_sum, rho), kind, b.value
            )
        worst = max(worst, r)
    return worst


def solve_z_subproblem(
    m: np.ndarray,
    resolved: ResolvedWeights,
    rho: float,
    kind: LossKind,
    merge_log: list[MergeEvent] | None = None,
) -> np.ndarray:
    """Minimize the rank-weighted loss plus (rho/2)||z - m||^2 over z.

    Sorts m ascending (stable), pairs rank weights with sorted slots,
    runs the merge loop, and inverse-permutes the block values back to
    the original sample order.
    """
    m = np.asarray(m, dtype=float).ravel()
    if not np.all(np.isfinite(m)):
        raise InvalidParameterError("targets contain non-finite entries")
    if not (rho > 0):
        raise InvalidParameterError(f"rho must be > 0, got {rho}")
    if m.shape[0] != resolved.n:
        raise InvalidParameterError(f"m has length {m.shape[0]}, expected {resolved.n}")
    order = np.argsort(m, kind="stable")
    m_sorted = m[order]
    if resolved.is_value_dependent:
        partition = pava_run_cpt(
            resolved.sigma_low, resolved.sigma_high, m_sorted, rho,
            resolved.reference, kind, merge_log,
        )
    elif is_topk_pattern(resolved.sigma) is not None:
        partition = pava_run_topk_fast(resolved.sigma, m_sorted, rho, kind, merge_log)
    else:
        partition = pava_run(resolved.sigma, m_sorted, rho, kind, merge_log)
    z = np.empty_like(m)
    z[order] = partition.values()
    return z


def chain_objective(
    z_sorted: np.ndarray,
    resolved: ResolvedWeights,
    m_sorted: np.ndarray,
    rho: float,
    kind: LossKind,
) -> float:
    """Objective of the sorted chain problem at a feasible z_sorted."""
    from .losses import loss_value_vec

    z_sorted = np.asarray(z_sorted, dtype=float)
    sigma = resolved.sigma_for(z_sorted)
    losses = loss_value_vec(kind, z_sorted)
    quad = 0.5 * rho * float(np.sum((z_sorted - m_sorted) ** 2))
    return float(sigma @ losses) + quad
