"""Scalar loss kernels and single-block minimization.

The chain solver repeatedly minimizes, over a scalar v, the aggregated
block objective

    s * l(v) + (rho / 2) * sum_i (v - m_i)^2

where s is the total rank weight of the block.  Only (s, count, m_sum)
are needed: sum_i (v - m_i)^2 differs from count * (v - m_sum/count)^2
by a v-independent constant, which is what makes block merges O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameterError


class LossKind(str, Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"


#: Upper bound on l' used to bracket scalar solves.  Both shipped losses
#: have derivative <= 1 (sigmoid and unit hinge slope).  A new loss must
#: supply its value, subgradient interval, and a derivative bound here.
DERIVATIVE_BOUND = {LossKind.LOGISTIC: 1.0, LossKind.HINGE: 1.0}

_NEWTON_MAX_ITER = 100
_DERIV_TOL = 1e-12


def loss_value(kind: LossKind, u: float) -> float:
    """Scalar loss: logistic log(1+e^u) or hinge max(0, 1+u)."""
    if kind == LossKind.HINGE:
        return max(0.0, 1.0 + u)
    # log1p(exp(u)) with the overflow-safe branch for large u.
    if u > 0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


def loss_value_vec(kind: LossKind, u: np.ndarray) -> np.ndarray:
    """Vectorized :func:`loss_value`."""
    u = np.asarray(u, dtype=float)
    if kind == LossKind.HINGE:
        return np.maximum(0.0, 1.0 + u)
    return np.logaddexp(0.0, u)


def loss_derivative_vec(kind: LossKind, u: np.ndarray) -> np.ndarray:
    """Pointwise derivative, using the right-hand slope at the hinge kink."""
    u = np.asarray(u, dtype=float)
    if kind == LossKind.HINGE:
        return np.where(u >= -1.0, 1.0, 0.0)
    return _sigmoid(u)


def loss_subgradient_interval(kind: LossKind, u: float) -> tuple[float, float]:
    """Subdifferential of the loss at u as a closed interval [lo, hi]."""
    if kind == LossKind.LOGISTIC:
        s = _sigmoid_scalar(u)
        return (s, s)
    if u < -1.0:
        return (0.0, 0.0)
    if u == -1.0:
        return (0.0, 1.0)
    return (1.0, 1.0)


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _sigmoid_scalar(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    eu = math.exp(u)
    return eu / (1.0 + eu)


@dataclass(frozen=True)
class BlockObjective:
    """Aggregated data of one block: s = sum of rank weights, count = block
    size, m_sum = sum of targets, rho = quadratic penalty weight."""

    s: float
    count: int
    m_sum: float
    rho: float

    def __post_init__(self):
        if not (self.rho > 0):
            raise InvalidParameterError(f"rho must be positive, got {self.rho}")
        if self.count < 1:
            raise InvalidParameterError(f"count must be >= 1, got {self.count}")
        if self.s < 0:
            raise InvalidParameterError(f"weight sum must be >= 0, got {self.s}")

    def quadratic_part(self, v: float) -> float:
        """(rho/2) * (count*v^2 - 2*m_sum*v); the constant sum(m_i^2) is dropped."""
        return 0.5 * self.rho * (self.count * v * v - 2.0 * self.m_sum * v)

    def value(self, kind: LossKind, v: float) -> float:
        return self.s * loss_value(kind, v) + self.quadratic_part(v)


def block_minimize(obj: BlockObjective, kind: LossKind) -> float:
    """Unique minimizer of ``s*l(v) + (rho/2)*sum (v - m_i)^2``.

    Hinge uses the three-case closed form around the kink at v = -1.
    Logistic uses safeguarded Newton on the strictly increasing derivative
    ``s*sigmoid(v) + rho*(count*v - m_sum)``, bracketed by
    ``[m_sum/count - s/(rho*count), m_sum/count]``.
    """
    if not (math.isfinite(obj.s) and math.isfinite(obj.m_sum)):
        raise InvalidParameterError("non-finite block objective inputs")
    mean_m = obj.m_sum / obj.count
    if obj.s == 0.0:
        return mean_m
    if kind == LossKind.HINGE:
        # Left branch (slope 0): valid strictly left of the kink.
        if mean_m < -1.0:
            return mean_m
        # Right branch (slope s).
        v_right = (obj.rho * obj.m_sum - obj.s) / (obj.rho * obj.count)
        if v_right > -1.0:
            return v_right
        # 0 lies in the subdifferential at the kink.
        return -1.0

    rc = obj.rho * obj.count
    lo = mean_m - obj.s / rc
    hi = mean_m
    if lo == hi:
        return lo

    def deriv(v: float) -> float:
        return obj.s * _sigmoid_scalar(v) + rc * v - obj.rho * obj.m_sum

    def deriv2(v: float) -> float:
        sg = _sigmoid_scalar(v)
        return obj.s * sg * (1.0 - sg) + rc

    v = 0.5 * (lo + hi)
    for _ in range(_NEWTON_MAX_ITER):
        d = deriv(v)
        if abs(d) <= _DERIV_TOL:
            return v
        if d > 0:
            hi = v
        else:
            lo = v
        step = d / deriv2(v)
        v_new = v - step
        if not (lo < v_new < hi):
            v_new = 0.5 * (lo + hi)  # Newton left the bracket: bisect
        if v_new == v:
            return v
        v = v_new
    # Bracket is tiny by now; finish with plain bisection.
    for _ in range(200):
        v = 0.5 * (lo + hi)
        if v == lo or v == hi:
            break
        if deriv(v) > 0:
            hi = v
        else:
            lo = v
    return v


def block_minimize_cpt(
    obj_low: BlockObjective,
    obj_high: BlockObjective,
    boundary: float,
    kind: LossKind,
) -> float:
    """Minimizer of the two-piece block objective with a weight switch.

    The weights obj_low apply on ``v <= boundary`` and obj_high on
    ``v > boundary``.  Each piece is convex: minimize both restricted to
    their half-lines (clamping to the boundary when the unconstrained
    minimizer falls on the wrong side) and keep the better one.  Ties go
    to the low piece, consistent with classifying v == boundary as low.
    """
    v_low = min(block_minimize(obj_low, kind), boundary)
    v_high = max(block_minimize(obj_high, kind), boundary)
    f_low = obj_low.value(kind, v_low)
    f_high = obj_high.value(kind, v_high)
    return v_low if f_low <= f_high else v_high


def block_stationarity_residual(
    obj: BlockObjective, kind: LossKind, v: float
) -> float:
    """Distance from 0 to the block subdifferential at v (0 when stationary)."""
    lo, hi = loss_subgradient_interval(kind, v)
    lin = obj.rho * (obj.count * v - obj.m_sum)
    a, b = obj.s * lo + lin, obj.s * hi + lin
    if a <= 0.0 <= b:
        return 0.0
    return min(abs(a), abs(b))


def block_stationarity_residual_cpt(
    obj_low: BlockObjective,
    obj_high: BlockObjective,
    boundary: float,
    kind: LossKind,
    v: float,
) -> float:
    """First-order residual of the two-piece block objective at v.

    At v == boundary the condition is one-sided: either the low piece is
    nonincreasing into the boundary or the high piece is nondecreasing
    away from it.
    """
    if v < boundary:
        return block_stationarity_residual(obj_low, kind, v)
    if v > boundary:
        return block_stationarity_residual(obj_high, kind, v)
    lo_l, hi_l = loss_subgradient_interval(kind, v)
    lin_l = obj_low.rho * (obj_low.count * v - obj_low.m_sum)
    low_ok = obj_low.s * lo_l + lin_l  # smallest low-piece subgradient
    lin_h = obj_high.rho * (obj_high.count * v - obj_high.m_sum)
    high_ok = obj_high.s * hi_l + lin_h  # largest high-piece subgradient
    return min(max(0.0, low_ok), max(0.0, -high_ok))
