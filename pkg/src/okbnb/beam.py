"""Beam-search upper bounds with a support-level memo shared across nodes."""

from __future__ import annotations

import threading
from collections import OrderedDict
from typing import Iterable

import numpy as np

from .core import InfeasibleConfigError, ProblemData, SolverConfig, SparseSolution, fit_support


class SupportCache:
    """Maps a sorted support tuple to its ridge fit.

    Fits depend on ``lambda2``, so one cache must only ever serve a single
    (problem, lambda2) pair.  ``capacity=None`` keeps everything; otherwise
    the least recently used entry is evicted.
    """

    def __init__(self, capacity: int | None = None):
        self.capacity = capacity
        self._store: OrderedDict[tuple[int, ...], SparseSolution] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._store)

    def __contains__(self, support):
        return tuple(support) in self._store

    def get(self, support: tuple[int, ...]) -> SparseSolution | None:
        with self._lock:
            sol = self._store.get(support)
            if sol is None:
                return None
            if self.capacity is not None:
                self._store.move_to_end(support)
            return sol

    def put(self, sol: SparseSolution) -> None:
        with self._lock:
            self._store[sol.support] = sol
            if self.capacity is not None:
                self._store.move_to_end(sol.support)
                while len(self._store) > self.capacity:
                    self._store.popitem(last=False)

    def fit(self, pd: ProblemData, lambda2: float, support: tuple[int, ...]) -> SparseSolution:
        sol = self.get(support)
        if sol is not None:
            self.hits += 1
            return sol
        self.misses += 1
        sol = fit_support(pd, lambda2, support)
        self.put(sol)
        return sol

    def clear(self):
        with self._lock:
            self._store.clear()
        self.hits = self.misses = 0


def expansion_scores(pd: ProblemData, lambda2: float, sol: SparseSolution) -> np.ndarray:
    """Loss decrease (up to a constant factor) of a line search along each axis."""
    idx = list(sol.support)
    grad = -2.0 * pd.xty
    if idx:
        grad = grad + 2.0 * (pd.gram[:, idx] @ sol.coeffs)
        grad[idx] += 2.0 * lambda2 * sol.coeffs
    denom = np.diag(pd.gram) + lambda2
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(denom > 0, grad**2 / denom, 0.0)
    return scores


def expand_support_by_one(
    pd: ProblemData,
    cfg: SolverConfig,
    sol: SparseSolution,
    cache: SupportCache,
    avoid: Iterable[int] = (),
    seen: set | None = None,
) -> list[SparseSolution]:
    """Refit the best ``beam_width`` one-coordinate extensions of ``sol``.

    Supports already in ``seen`` are skipped; new ones are added to it.
    """
    blocked = np.zeros(pd.p, dtype=bool)
    blocked[list(sol.support)] = True
    blocked[list(avoid)] = True
    cand = np.flatnonzero(~blocked)
    if cand.size == 0:
        return []
    scores = expansion_scores(pd, cfg.lambda2, sol)[cand]
    picks = cand[np.argsort(-scores, kind="stable")[: cfg.beam_width]]
    out = []
    base = sol.support
    for j in picks:
        support = tuple(sorted(base + (int(j),)))
        if seen is not None:
            if support in seen:
                continue
            seen.add(support)
        out.append(cache.fit(pd, cfg.lambda2, support))
    return out


def upper_solve(
    pd: ProblemData,
    cfg: SolverConfig,
    select: Iterable[int] = (),
    avoid: Iterable[int] = (),
    cache: SupportCache | None = None,
) -> SparseSolution:
    """Best size-``k`` solution found by beam search from the forced-in fit."""
    select = tuple(sorted(set(int(j) for j in select)))
    avoid = tuple(sorted(set(int(j) for j in avoid)))
    if cfg.k > pd.p - len(avoid) or len(select) > cfg.k or set(select) & set(avoid):
        raise InfeasibleConfigError("node constraints admit no size-k support")
    if cache is None:
        cache = SupportCache()
    pool = [cache.fit(pd, cfg.lambda2, select)]
    seen: set = set()
    for _ in range(len(select), cfg.k):
        children = []
        for sol in pool:
            children.extend(expand_support_by_one(pd, cfg, sol, cache, avoid, seen))
        children.sort(key=lambda s: (s.loss, s.support))
        pool = children[: cfg.beam_width]
    return pool[0]
