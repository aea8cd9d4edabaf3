"""Problem data, ridge loss and support-restricted ridge solves.

Everything downstream works in Gram space: ``X`` is reduced once to
``X^T X``, ``X^T y`` and ``y^T y`` and never touched again.  The loss
drops the constant ``y^T y``, so it is usually negative; add ``yty`` back
to obtain the residual sum of squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a restricted normal-equation system cannot be factored."""


class InfeasibleConfigError(ValueError):
    """Raised when a solver configuration cannot be satisfied by the data."""


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Precomputed Gram system of a least-squares problem."""

    gram: np.ndarray
    xty: np.ndarray
    yty: float
    n: int
    p: int

    def __post_init__(self):
        gram = np.asarray(self.gram, dtype=float)
        xty = np.asarray(self.xty, dtype=float).ravel()
        if self.p < 1 or self.n < 1:
            raise ValueError(f"need n >= 1 and p >= 1, got n={self.n}, p={self.p}")
        if gram.shape != (self.p, self.p) or xty.shape != (self.p,):
            raise ValueError(
                f"shape mismatch: gram {gram.shape}, xty {xty.shape}, p={self.p}"
            )
        if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(xty))):
            raise ValueError("gram and xty must be finite")
        scale = max(np.abs(gram).max(), 1.0)
        if np.abs(gram - gram.T).max() > 1e-10 * scale:
            raise ValueError("gram must be symmetric")
        gram = 0.5 * (gram + gram.T)
        gram.setflags(write=False)
        xty.setflags(write=False)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "xty", xty)
        object.__setattr__(self, "yty", float(self.yty))

    @classmethod
    def from_gram(cls, gram, xty, yty: float = 0.0, n: int = 1) -> "ProblemData":
        gram = np.asarray(gram, dtype=float)
        return cls(gram=gram, xty=xty, yty=yty, n=n, p=gram.shape[0])


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the branch-and-bound solver.

    ``k`` is checked against the problem size when a solve starts.
    """

    k: int
    lambda2: float = 0.0
    gap_tol: float = 1e-4
    time_limit_s: float | None = None
    beam_width: int = 50
    admm_iters: int = 100
    use_admm: bool = True
    use_cmf: bool = False

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InfeasibleConfigError(f"k must be a positive integer, got {self.k}")
        if not np.isfinite(self.lambda2) or self.lambda2 < 0:
            raise InfeasibleConfigError(f"lambda2 must be >= 0, got {self.lambda2}")
        if not self.gap_tol > 0:
            raise InfeasibleConfigError(f"gap_tol must be > 0, got {self.gap_tol}")
        if self.beam_width < 1:
            raise InfeasibleConfigError("beam_width must be >= 1")
        if self.admm_iters < 0:
            raise InfeasibleConfigError("admm_iters must be >= 0")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise InfeasibleConfigError("time_limit_s must be positive")

    def check(self, pd: ProblemData) -> None:
        if self.k > pd.p:
            raise InfeasibleConfigError(f"k={self.k} exceeds the feature count p={pd.p}")


@dataclass(frozen=True)
class SparseSolution:
    """A sparse coefficient vector stored by its support."""

    support: tuple[int, ...]
    coeffs: np.ndarray = field(repr=False)
    loss: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if len(self.support) != coeffs.size:
            raise ValueError("support and coeffs must have equal length")
        object.__setattr__(self, "coeffs", coeffs)

    def dense(self, p: int) -> np.ndarray:
        beta = np.zeros(p)
        beta[list(self.support)] = self.coeffs
        return beta

    @classmethod
    def from_dense(cls, beta: np.ndarray, loss: float) -> "SparseSolution":
        support = tuple(int(j) for j in np.flatnonzero(beta))
        return cls(support=support, coeffs=beta[list(support)], loss=float(loss))


def build_problem(X, y) -> ProblemData:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be two-dimensional, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError(f"y must be a vector of length {X.shape[0]}, got shape {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")
    gram = X.T @ X
    gram = 0.5 * (gram + gram.T)
    return ProblemData(gram=gram, xty=X.T @ y, yty=float(y @ y), n=X.shape[0], p=X.shape[1])


def evaluate_loss(pd: ProblemData, beta, lambda2: float) -> float:
    """Ridge loss ``b'Gb - 2 xty'b + lambda2 |b|^2`` without the ``y'y`` term."""
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    nz = np.flatnonzero(beta)
    b = beta[nz]
    quad = b @ pd.gram[np.ix_(nz, nz)] @ b
    return float(quad - 2.0 * (pd.xty[nz] @ b) + lambda2 * (b @ b))


def gradient(pd: ProblemData, beta, lambda2: float) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    return 2.0 * (pd.gram @ beta) - 2.0 * pd.xty + 2.0 * lambda2 * beta


def _factor_spd(A: np.ndarray, lambda2: float):
    """Cholesky factor of ``A + lambda2 I`` with jitter escalation when singular."""
    m = A.shape[0]
    M = A + lambda2 * np.eye(m)
    try:
        return sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    base = np.trace(A) / m
    if base > 0:
        for rel in (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
            try:
                return sla.cho_factor(M + rel * base * np.eye(m), lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                continue
    raise SingularSystemError(f"restricted ridge system of size {m} is singular")


def solve_on(pd: ProblemData, lambda2: float, idx: Sequence[int]) -> np.ndarray:
    """Ridge coefficients on the coordinates ``idx`` (others fixed at zero)."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size == 0:
        return np.zeros(0)
    factor = _factor_spd(pd.gram[np.ix_(idx, idx)], lambda2)
    return sla.cho_solve(factor, pd.xty[idx], check_finite=False)


def free_indices(p: int, avoid: Iterable[int]) -> np.ndarray:
    mask = np.ones(p, dtype=bool)
    mask[list(avoid)] = False
    return np.flatnonzero(mask)


def ridge_solve(pd: ProblemData, lambda2: float, avoid: Iterable[int] = ()) -> np.ndarray:
    """Minimize the ridge loss with coordinates in ``avoid`` pinned to zero."""
    free = free_indices(pd.p, avoid)
    gamma = np.zeros(pd.p)
    gamma[free] = solve_on(pd, lambda2, free)
    return gamma


def fit_support(pd: ProblemData, lambda2: float, support: Iterable[int]) -> SparseSolution:
    """Ridge fit restricted to ``support``; the loss is evaluated on that support."""
    support = tuple(sorted(int(j) for j in support))
    idx = np.asarray(support, dtype=np.intp)
    coeffs = solve_on(pd, lambda2, idx)
    if idx.size:
        quad = coeffs @ pd.gram[np.ix_(idx, idx)] @ coeffs
        loss = quad - 2.0 * (pd.xty[idx] @ coeffs) + lambda2 * (coeffs @ coeffs)
    else:
        loss = 0.0
    return SparseSolution(support=support, coeffs=coeffs, loss=float(loss))
