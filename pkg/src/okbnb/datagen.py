"""Synthetic sparse-regression benchmarks, an exhaustive oracle, and recovery metrics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import ProblemData, SolverConfig, SparseSolution, fit_support

MAX_ORACLE_SUPPORTS = 10**6


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    p: int
    k_true: int
    rho: float = 0.1
    snr: float = 5.0
    seed: int = 0
    # draw noise with variance |X beta*|^2 / snr instead of dividing by n as well
    literal_noise: bool = False

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.k_true < 1:
            raise ValueError("n, p and k_true must be positive")
        if self.p < self.k_true:
            raise ValueError(f"p={self.p} must be at least k_true={self.k_true}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not self.snr > 0:
            raise ValueError("snr must be positive")


def planted_support(p: int, k: int) -> np.ndarray:
    """0-based indices ``j`` with ``(j + 1) % (p // k) == 0``, first ``k`` of them.

    When ``k`` does not divide ``p`` the rule can produce more than ``k``
    hits; the surplus at the end is dropped.
    """
    if not 1 <= k <= p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={p}")
    step = p // k
    return np.arange(step - 1, p, step)[:k]


def generate(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows from N(0, Sigma) with ``Sigma_ij = rho^|i-j|``, plus a noisy response.

    Columns follow the AR(1) recursion, which reproduces Sigma exactly.
    """
    rng = np.random.default_rng(spec.seed)
    n, p, rho = spec.n, spec.p, spec.rho
    Z = rng.standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = Z[:, 0]
    scale = math.sqrt(1.0 - rho**2)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * Z[:, j]
    beta = np.zeros(p)
    beta[planted_support(p, spec.k_true)] = 1.0
    signal = X @ beta
    var = signal @ signal / spec.snr
    if not spec.literal_noise:
        var /= n
    y = signal + math.sqrt(var) * rng.standard_normal(n)
    return X, y, beta


def brute_force_optimum(pd: ProblemData, cfg: SolverConfig) -> SparseSolution:
    """Enumerate every size-k support; ties go to the lexicographically first."""
    cfg.check(pd)
    count = math.comb(pd.p, cfg.k)
    if count > MAX_ORACLE_SUPPORTS:
        raise ValueError(f"C({pd.p},{cfg.k}) = {count} supports is too many to enumerate")
    best = None
    for support in itertools.combinations(range(pd.p), cfg.k):
        sol = fit_support(pd, cfg.lambda2, support)
        if best is None or sol.loss < best.loss:
            best = sol
    return best


def recovery_metrics(found: SparseSolution, beta_star) -> tuple[float, float]:
    """True positivity rate and squared coefficient error.

    The rate is ``|found & true| / (|true| + |found - true|)`` and is 0 when
    both supports are empty.
    """
    beta_star = np.asarray(beta_star, dtype=float)
    beta_hat = found.dense(beta_star.size)
    true = set(np.flatnonzero(beta_star).tolist())
    got = set(j for j, c in zip(found.support, found.coeffs) if c != 0)
    denom = len(true) + len(got - true)
    tpr = len(got & true) / denom if denom else 0.0
    return tpr, float(np.sum((beta_hat - beta_star) ** 2))
