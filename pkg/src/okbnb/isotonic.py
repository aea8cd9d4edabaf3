"""Weighted isotonic regression on a chain (pool adjacent violators)."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np


@dataclass(frozen=True)
class IsotonicInstance:
    """``order[0]`` is the position whose fitted value must be largest.

    The fit minimizes ``sum w_j (v_j - b_j)^2`` subject to ``v`` being
    nonincreasing when read along ``order``.
    """

    order: np.ndarray
    weights: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.intp)
        weights = np.asarray(self.weights, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        m = targets.size
        if weights.shape != (m,) or order.shape != (m,):
            raise ValueError("order, weights and targets must have the same length")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        if not np.array_equal(np.sort(order), np.arange(m)):
            raise ValueError("order must be a permutation of range(m)")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_magnitudes(cls, a, weights, targets) -> "IsotonicInstance":
        """Order by ``|a|`` descending; equal magnitudes keep index order."""
        order = np.argsort(-np.abs(np.asarray(a, dtype=float)), kind="stable")
        return cls(order=order, weights=weights, targets=targets)


@nb.njit(cache=True)
def pava_nonincreasing(b, w):
    """Nonincreasing weighted least-squares fit of ``b`` (already in chain order)."""
    m = b.shape[0]
    out = np.empty(m)
    if m == 0:
        return out
    sw = np.empty(m)
    swb = np.empty(m)
    start = np.empty(m, dtype=np.int64)
    top = -1
    for i in range(m):
        top += 1
        sw[top] = w[i]
        swb[top] = w[i] * b[i]
        start[top] = i
        # previous block mean must be >= current block mean
        while top > 0 and swb[top - 1] * sw[top] < swb[top] * sw[top - 1]:
            sw[top - 1] += sw[top]
            swb[top - 1] += swb[top]
            top -= 1
    for blk in range(top + 1):
        lo = start[blk]
        hi = start[blk + 1] if blk < top else m
        val = swb[blk] / sw[blk]
        for i in range(lo, hi):
            out[i] = val
    return out


def solve_isotonic(inst: IsotonicInstance) -> np.ndarray:
    """Fitted values in the original index order."""
    chain = pava_nonincreasing(inst.targets[inst.order], inst.weights[inst.order])
    v = np.empty_like(chain)
    v[inst.order] = chain
    return v
