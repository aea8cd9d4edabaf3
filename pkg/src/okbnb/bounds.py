"""Lower bounds for k-sparse ridge regression under forced-in/forced-out sets.

All bounds evaluate the inner-minimized saddle objective

    h(gamma) = -gamma' Q gamma - (1/(lambda2 + lam)) * top-k sum of d_j^2,
    d = xty - Q gamma,  Q = gram - lam I,

at some ``gamma``; any ``gamma`` gives a valid bound.  ``lam`` is the
smallest eigenvalue of the full Gram matrix, which by eigenvalue
interlacing never exceeds the smallest eigenvalue of a principal
submatrix, so it is computed once and reused at every node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.linalg as sla

from .core import ProblemData, SolverConfig, evaluate_loss, free_indices, ridge_solve
from .isotonic import pava_nonincreasing

ADMM_STEP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenInfo:
    lambda_min: float
    lambda_max_q: float
    lambda_minpos_q: float
    degenerate: bool
    # full spectrum of the Gram matrix; used to solve root-node ADMM systems
    evals: np.ndarray = field(repr=False)
    evecs: np.ndarray = field(repr=False)

    @property
    def rho(self) -> float:
        """ADMM step size ``2 / sqrt(lmax(Q) * lmin>0(Q))``."""
        return 2.0 / np.sqrt(self.lambda_max_q * self.lambda_minpos_q)


@dataclass
class AdmmState:
    gamma: np.ndarray
    p_vec: np.ndarray
    q_vec: np.ndarray
    theta: np.ndarray
    rho: float
    best_bound: float
    history: list = field(default_factory=list)
    iterations: int = 0


def compute_eigen_info(pd: ProblemData) -> EigenInfo:
    evals, evecs = np.linalg.eigh(pd.gram)
    scale = max(abs(evals[0]), abs(evals[-1]))
    if evals[0] < -1e-8 * scale:
        raise ValueError(f"gram is not positive semidefinite (min eigenvalue {evals[0]:.3e})")
    lam = max(float(evals[0]), 0.0)
    q = np.clip(evals - lam, 0.0, None)
    lmax = float(q[-1])
    positive = q[q > 1e-10 * lmax] if lmax > 0 else q[:0]
    lminpos = float(positive[0]) if positive.size else 0.0
    trace = float(np.trace(pd.gram))
    degenerate = lmax <= 1e-10 * trace or lminpos == 0.0
    return EigenInfo(lam, lmax, lminpos, degenerate, evals, evecs)


def sum_bottom(values, m: int) -> float:
    """Sum of the ``m`` smallest entries (partial selection, no full sort)."""
    values = np.asarray(values, dtype=float).ravel()
    if m < 0 or m > values.size:
        raise ValueError(f"m={m} out of range for {values.size} values")
    if m == 0:
        return 0.0
    if m == values.size:
        return float(values.sum())
    return float(np.partition(values, m - 1)[:m].sum())


def sum_top(values, m: int) -> float:
    values = np.asarray(values, dtype=float).ravel()
    if m < 0 or m > values.size:
        raise ValueError(f"m={m} out of range for {values.size} values")
    if m == 0:
        return 0.0
    if m == values.size:
        return float(values.sum())
    return float(np.partition(values, values.size - m)[values.size - m:].sum())


def _check_node(pd: ProblemData, cfg: SolverConfig, select, avoid) -> tuple[list, list]:
    select = sorted(set(int(j) for j in select))
    avoid = sorted(set(int(j) for j in avoid))
    if set(select) & set(avoid):
        raise ValueError("select and avoid must be disjoint")
    if len(select) > cfg.k:
        raise ValueError("more forced-in coordinates than k")
    if cfg.k > pd.p - len(avoid):
        raise ValueError("k exceeds the number of non-avoided coordinates")
    return select, avoid


def fast_lower_bound(
    pd: ProblemData,
    cfg: SolverConfig,
    select: Iterable[int],
    avoid: Iterable[int],
    eig: EigenInfo,
) -> tuple[float, np.ndarray]:
    """Ridge loss of the restricted ridge fit plus a strong-convexity regret.

    Returns the bound and the restricted ridge minimizer (zero on ``avoid``).
    """
    select, avoid = _check_node(pd, cfg, select, avoid)
    gamma = ridge_solve(pd, cfg.lambda2, avoid)
    rest = np.ones(pd.p, dtype=bool)
    rest[avoid] = False
    rest[select] = False
    regret = sum_bottom(gamma[rest] ** 2, pd.p - len(avoid) - cfg.k)
    bound = evaluate_loss(pd, gamma, cfg.lambda2) + (cfg.lambda2 + eig.lambda_min) * regret
    return bound, gamma


def _h_from_parts(quad: float, d: np.ndarray, sel_mask: np.ndarray, m_top: int, lam_sum: float) -> float:
    """Closed-form inner minimum over the relaxed indicators."""
    forced = float(d[sel_mask] @ d[sel_mask])
    top = sum_top(d[~sel_mask] ** 2, m_top)
    total = forced + top
    if lam_sum <= 0:
        return -quad if total == 0 else -np.inf
    return -quad - total / lam_sum


def saddle_h(
    pd: ProblemData,
    cfg: SolverConfig,
    gamma,
    select: Iterable[int],
    avoid: Iterable[int],
    eig: EigenInfo,
) -> float:
    select, avoid = _check_node(pd, cfg, select, avoid)
    gamma = np.asarray(gamma, dtype=float)
    if avoid and np.any(gamma[avoid] != 0):
        raise ValueError("gamma must vanish on avoided coordinates")
    free = free_indices(pd.p, avoid)
    g = gamma[free]
    qg = pd.gram[np.ix_(free, free)] @ g - eig.lambda_min * g
    d = pd.xty[free] - qg
    sel_mask = np.isin(free, select)
    return _h_from_parts(float(g @ qg), d, sel_mask, cfg.k - len(select), cfg.lambda2 + eig.lambda_min)


class _Restricted:
    """Free-coordinate view of a node: avoided coordinates deleted, indices relabeled."""

    def __init__(self, pd: ProblemData, cfg: SolverConfig, select, avoid, eig: EigenInfo):
        self.free = free_indices(pd.p, avoid)
        self.root = len(avoid) == 0
        G = pd.gram if self.root else pd.gram[np.ix_(self.free, self.free)]
        self.Q = G - eig.lambda_min * np.eye(self.free.size)
        self.xty = pd.xty[self.free]
        self.sel_mask = np.isin(self.free, list(select))
        self.m_top = cfg.k - len(select)
        self.lam_sum = cfg.lambda2 + eig.lambda_min

    def h(self, g: np.ndarray, qg: np.ndarray | None = None) -> float:
        if qg is None:
            qg = self.Q @ g
        return _h_from_parts(float(g @ qg), self.xty - qg, self.sel_mask, self.m_top, self.lam_sum)


def run_admm(
    pd: ProblemData,
    cfg: SolverConfig,
    select: Iterable[int],
    avoid: Iterable[int],
    eig: EigenInfo,
    warm_gamma,
    fast_bound: float | None = None,
) -> AdmmState:
    """ADMM on the saddle objective, keeping the best ``h`` seen.

    The proximal step for the top-k term is a sign-preserving weighted
    isotonic regression on the ``|a|`` order of the non-forced coordinates.
    """
    select, avoid = _check_node(pd, cfg, select, avoid)
    r = _Restricted(pd, cfg, select, avoid, eig)
    g = np.asarray(warm_gamma, dtype=float)[r.free]
    qg = r.Q @ g
    best = r.h(g, qg)
    if fast_bound is not None:
        best = max(best, fast_bound)
    zeros = np.zeros_like(g)
    if eig.degenerate or r.lam_sum <= 0 or cfg.admm_iters == 0:
        return AdmmState(g, r.xty - qg, zeros, zeros.copy(), np.nan, best, [best])

    rho = eig.rho
    shift = 2.0 / rho
    if r.root:
        # reuse the root spectrum: (2/rho I + Q) = V diag(2/rho + evals - lam) V'
        V = eig.evecs
        inv_diag = 1.0 / (shift + np.clip(eig.evals - eig.lambda_min, 0.0, None))

        def solve(rhs):
            return V @ (inv_diag * (V.T @ rhs))
    else:
        factor = sla.cho_factor(r.Q + shift * np.eye(g.size), lower=True, check_finite=False)

        def solve(rhs):
            return sla.cho_solve(factor, rhs, check_finite=False)

    boost = 1.0 + 2.0 / (rho * r.lam_sum)
    sel = r.sel_mask
    rest = np.flatnonzero(~sel)
    p_vec = r.xty - qg
    q_vec = zeros.copy()
    theta = zeros.copy()
    state = AdmmState(g, p_vec, q_vec, theta, rho, best, [best])
    for it in range(1, cfg.admm_iters + 1):
        g_new = solve(r.xty - p_vec - q_vec)
        qg = r.Q @ g_new
        theta = 2.0 * qg + p_vec - r.xty
        a = r.xty - theta - q_vec
        absa = np.abs(a)
        v = np.empty_like(a)
        v[sel] = absa[sel] / boost
        order = rest[np.argsort(-absa[rest], kind="stable")]
        w = np.ones(order.size)
        w[: r.m_top] = boost
        v[order] = pava_nonincreasing(absa[order] / w, w)
        p_vec = np.sign(a) * v
        q_vec = q_vec + theta + p_vec - r.xty
        if not (np.all(np.isfinite(g_new)) and np.all(np.isfinite(q_vec))):
            break
        h = r.h(g_new, qg)
        if h > best:
            best = h
        step = np.max(np.abs(g_new - g)) if g.size else 0.0
        g = g_new
        state.history.append(best)
        state.iterations = it
        if step <= ADMM_STEP_TOL:
            break
    state.gamma, state.p_vec, state.q_vec, state.theta = g, p_vec, q_vec, theta
    state.best_bound = best
    return state


def admm_lower_bound(
    pd: ProblemData,
    cfg: SolverConfig,
    select: Iterable[int],
    avoid: Iterable[int],
    eig: EigenInfo,
    warm_gamma,
    fast_bound: float | None = None,
) -> float:
    return run_admm(pd, cfg, select, avoid, eig, warm_gamma, fast_bound).best_bound


def cmf_subgradient_bound(
    pd: ProblemData,
    cfg: SolverConfig,
    select: Iterable[int],
    avoid: Iterable[int],
    eig: EigenInfo,
    h_star: float,
    warm_gamma,
    iters: int | None = None,
    fast_bound: float | None = None,
) -> float:
    """Subgradient ascent on ``h`` with Camerini-Fratta-Maffioli deflection."""
    select, avoid = _check_node(pd, cfg, select, avoid)
    r = _Restricted(pd, cfg, select, avoid, eig)
    iters = cfg.admm_iters if iters is None else iters
    g = np.asarray(warm_gamma, dtype=float)[r.free].copy()
    qg = r.Q @ g
    h = r.h(g, qg)
    best = h if fast_bound is None else max(h, fast_bound)
    if r.lam_sum <= 0:
        return best
    v = np.zeros_like(g)
    for _ in range(iters):
        d = r.xty - qg
        z = r.sel_mask.astype(float)
        rest = np.flatnonzero(~r.sel_mask)
        if r.m_top:
            top = rest[np.argsort(-(d[rest] ** 2), kind="stable")[: r.m_top]]
            z[top] = 1.0
        w = -2.0 * qg + (2.0 / r.lam_sum) * (r.Q @ (z * d))
        vv = v @ v
        s = max(0.0, -1.5 * (v @ w) / vv) if vv > 0 else 0.0
        v = w + s * v
        vv = v @ v
        if not vv > 0 or not np.isfinite(vv):
            break
        alpha = (h_star - h) / vv
        if not alpha > 0:
            break
        g = g + alpha * v
        qg = r.Q @ g
        h = r.h(g, qg)
        if not np.isfinite(h):
            break
        best = max(best, h)
    return best
