"""Breadth-first branch-and-bound for k-sparse ridge regression."""

from __future__ import annotations

import math
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

import numpy as np

from .beam import SupportCache, upper_solve
from .bounds import EigenInfo, admm_lower_bound, cmf_subgradient_bound, compute_eigen_info, fast_lower_bound
from .core import ProblemData, SolverConfig, SparseSolution, free_indices

PRUNE_RTOL = 1e-9

ProgressCallback = Callable[[int, float, float, float, float], None]


class Status(str, Enum):
    OPTIMAL = "Optimal"
    GAP_REACHED = "GapReached"
    TIME_LIMIT = "TimeLimit"
    # not produced by the sequential driver: an empty queue certifies optimality
    QUEUE_EXHAUSTED = "QueueExhausted"


@dataclass
class Node:
    select: tuple[int, ...]
    avoid: tuple[int, ...]
    parent_lower: float = -math.inf
    lower: float | None = None

    @property
    def depth(self) -> int:
        return len(self.select) + len(self.avoid)


@dataclass
class BnBResult:
    best: SparseSolution
    upper: float
    lower: float
    gap: float
    nodes_processed: int
    nodes_pruned: int
    elapsed_s: float
    status: Status

    def dense(self, p: int) -> np.ndarray:
        return self.best.dense(p)


def relative_gap(upper: float, lower: float) -> float:
    if lower >= upper:
        return 0.0
    if upper == 0:
        return math.inf
    return (upper - lower) / abs(upper)


def branch_coordinate(pd: ProblemData, cfg: SolverConfig, sol: SparseSolution, select: Iterable[int]) -> int:
    """Support coordinate whose removal raises the ridge loss the most."""
    select = set(int(j) for j in select)
    cand = np.array([j for j in sol.support if j not in select], dtype=np.intp)
    if cand.size == 0:
        raise ValueError("no branchable coordinate: the support is fully forced in")
    beta = sol.dense(pd.p)
    idx = list(sol.support)
    a_beta = pd.gram[cand][:, idx] @ sol.coeffs + cfg.lambda2 * beta[cand]
    b = beta[cand]
    delta = -2.0 * a_beta * b + (pd.gram[cand, cand] + cfg.lambda2) * b**2 + 2.0 * pd.xty[cand] * b
    return int(cand[int(np.argmax(delta))])


def _is_leaf(node: Node, k: int, p: int) -> bool:
    return len(node.select) == k or p - len(node.avoid) == k


def solve(
    pd: ProblemData,
    cfg: SolverConfig,
    *,
    eig: EigenInfo | None = None,
    cache: SupportCache | None = None,
    callback: ProgressCallback | None = None,
    callback_every: int = 1,
) -> BnBResult:
    t0 = time.perf_counter()
    cfg.check(pd)
    if eig is None:
        eig = compute_eigen_info(pd)
    if cache is None:
        cache = SupportCache()
    k, p = cfg.k, pd.p

    best = SparseSolution(support=(), coeffs=np.zeros(0), loss=0.0)
    upper, lower = 0.0, -math.inf
    queue = deque([Node((), ())])
    created = defaultdict(int, {0: 1})
    solved = defaultdict(int)
    depth_min = defaultdict(lambda: math.inf)
    unsolved = 0
    processed = pruned = 0

    def result(status: Status) -> BnBResult:
        lo = min(lower, upper)
        return BnBResult(best, upper, lo, relative_gap(upper, lo), processed, pruned,
                         time.perf_counter() - t0, status)

    while queue:
        if cfg.time_limit_s is not None and time.perf_counter() - t0 >= cfg.time_limit_s:
            open_bound = min(min(nd.parent_lower for nd in queue), upper)
            lower = max(lower, open_bound)
            gap = relative_gap(upper, min(lower, upper))
            return result(Status.GAP_REACHED if gap <= cfg.gap_tol else Status.TIME_LIMIT)

        node = queue.popleft()
        processed += 1
        leaf_sol = None
        if _is_leaf(node, k, p):
            support = node.select if len(node.select) == k else tuple(free_indices(p, node.avoid))
            leaf_sol = cache.fit(pd, cfg.lambda2, support)
            bound = leaf_sol.loss
        else:
            bound, gamma = fast_lower_bound(pd, cfg, node.select, node.avoid, eig)
            if bound < upper:
                tight = bound
                if cfg.use_admm:
                    tight = max(tight, admm_lower_bound(pd, cfg, node.select, node.avoid, eig, gamma, bound))
                if cfg.use_cmf:
                    tight = max(tight, cmf_subgradient_bound(
                        pd, cfg, node.select, node.avoid, eig, upper, gamma, fast_bound=bound))
                bound = tight
        node.lower = bound
        d = node.depth
        solved[d] += 1
        depth_min[d] = min(depth_min[d], bound)

        if callback is not None and processed % callback_every == 0:
            callback(processed, upper, min(lower, upper), relative_gap(upper, min(lower, upper)),
                     time.perf_counter() - t0)

        if bound >= upper - PRUNE_RTOL * abs(upper):
            pruned += 1
            continue

        # breadth-first order: every depth shallower than d is fully solved
        advanced = False
        while unsolved < d or (unsolved == d and solved[d] == created[d]):
            lower = max(lower, depth_min[unsolved])
            unsolved += 1
            advanced = True
        if advanced and relative_gap(upper, min(lower, upper)) <= cfg.gap_tol:
            return result(Status.OPTIMAL)

        sol = leaf_sol if leaf_sol is not None else upper_solve(pd, cfg, node.select, node.avoid, cache)
        if sol.loss < upper:
            best, upper = sol, sol.loss
            if relative_gap(upper, min(lower, upper)) <= cfg.gap_tol:
                return result(Status.OPTIMAL)
        if leaf_sol is not None:
            continue

        j = branch_coordinate(pd, cfg, sol, node.select)
        queue.append(Node(tuple(sorted(node.select + (j,))), node.avoid, bound))
        queue.append(Node(node.select, tuple(sorted(node.avoid + (j,))), bound))
        created[d + 1] += 2

    lower = upper
    return result(Status.OPTIMAL)
