"""Sparse identification of polynomial ODEs with certified k-sparse ridge fits.

A trajectory is simulated with RK4, perturbed with multiplicative noise,
differentiated with a 9-point quadratic Savitzky-Golay filter, and each
state dimension is regressed on a monomial library over a (k, lambda2)
grid.  Models are chosen per dimension by AICc on the last third of the
trajectory.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import savgol_filter

from .beam import SupportCache
from .bnb import Status, solve
from .bounds import compute_eigen_info
from .core import InfeasibleConfigError, SolverConfig, SparseSolution, build_problem
from .datagen import recovery_metrics

log = logging.getLogger(__name__)

K_GRID = (1, 2, 3, 4, 5)
LAMBDA_GRID = (1e-5, 1e-3, 1e-2, 0.05, 0.2)


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DynSystem:
    name: str
    dim: int
    rhs: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    # per state dimension: {exponent tuple: coefficient}
    terms: tuple[dict, ...] = field(repr=False)
    var_names: tuple[str, ...] = ()
    sample_x0: Callable[[np.random.Generator], np.ndarray] | None = field(default=None, repr=False)

    @property
    def true_sparsity(self) -> tuple[int, ...]:
        return tuple(sum(1 for c in t.values() if c != 0) for t in self.terms)

    def true_coeffs(self, degree: int) -> np.ndarray:
        """``dim x m`` coefficient matrix in the degree-``degree`` monomial basis."""
        col = {e: i for i, e in enumerate(monomial_exponents(self.dim, degree))}
        out = np.zeros((self.dim, len(col)))
        for i, t in enumerate(self.terms):
            for e, c in t.items():
                if e not in col:
                    raise ValueError(f"{self.name} needs monomials of degree {sum(e)} > {degree}")
                out[i, col[e]] = c
        return out


def _unit(d: int, *idx: int) -> tuple[int, ...]:
    e = [0] * d
    for i in idx:
        e[i] += 1
    return tuple(e)


def lorenz(sigma: float = 10.0, beta: float = 8.0 / 3.0, rho: float = 28.0) -> DynSystem:
    def rhs(s):
        x, y, z = s[..., 0], s[..., 1], s[..., 2]
        return np.stack([sigma * (y - x), x * (rho - z) - y, x * y - beta * z], axis=-1)

    u = lambda *i: _unit(3, *i)  # noqa: E731
    terms = (
        {u(0): -sigma, u(1): sigma},
        {u(0): rho, u(1): -1.0, u(0, 2): -1.0},
        {u(0, 1): 1.0, u(2): -beta},
    )

    def x0(rng):
        return np.array([rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(10, 40)])

    return DynSystem("lorenz", 3, rhs, terms, ("x", "y", "z"), x0)


def hopf(mu: float = -0.05, omega: float = 1.0, A: float = 1.0) -> DynSystem:
    def rhs(s):
        x, y = s[..., 0], s[..., 1]
        r2 = x * x + y * y
        return np.stack([mu * x + omega * y - A * x * r2, -omega * x + mu * y - A * y * r2], axis=-1)

    u = lambda *i: _unit(2, *i)  # noqa: E731
    terms = (
        {u(0): mu, u(1): omega, u(0, 0, 0): -A, u(0, 1, 1): -A},
        {u(0): -omega, u(1): mu, u(0, 0, 1): -A, u(1, 1, 1): -A},
    )

    def x0(rng):
        r, phi = rng.uniform(0.5, 1.5), rng.uniform(0, 2 * np.pi)
        return np.array([r * np.cos(phi), r * np.sin(phi)])

    return DynSystem("hopf", 2, rhs, terms, ("x", "y"), x0)


def mhd() -> DynSystem:
    # state order: V1, V2, V3, B1, B2, B3
    def rhs(s):
        V1, V2, V3, B1, B2, B3 = (s[..., i] for i in range(6))
        return np.stack([
            4 * V2 * V3 - 4 * B2 * B3,
            -7 * V1 * V3 + 7 * B1 * B2,
            3 * V1 * V2 - 3 * B1 * B2,
            2 * B3 * V2 - 2 * V3 * B2,
            5 * V3 * B1 - 5 * B3 * V1,
            9 * V1 * B2 - 9 * B1 * V2,
        ], axis=-1)

    u = lambda *i: _unit(6, *i)  # noqa: E731
    terms = (
        {u(1, 2): 4.0, u(4, 5): -4.0},
        {u(0, 2): -7.0, u(3, 4): 7.0},
        {u(0, 1): 3.0, u(3, 4): -3.0},
        {u(1, 5): 2.0, u(2, 4): -2.0},
        {u(2, 3): 5.0, u(0, 5): -5.0},
        {u(0, 4): 9.0, u(1, 3): -9.0},
    )

    def x0(rng):
        return rng.uniform(-1, 1, size=6)

    return DynSystem("mhd", 6, rhs, terms, ("V1", "V2", "V3", "B1", "B2", "B3"), x0)


SYSTEMS = {"lorenz": lorenz, "hopf": hopf, "mhd": mhd}


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    noisy_states: np.ndarray
    derivatives: np.ndarray
    dt: float


def rk4(rhs, x0, n_steps: int, dt: float) -> np.ndarray:
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((n_steps + 1, x.size))
    out[0] = x
    # overflow is expected on divergence and reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * dt * k1)
            k3 = rhs(x + 0.5 * dt * k2)
            k4 = rhs(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(f"state became non-finite at step {i + 1} (t={(i + 1) * dt:g})")
            out[i + 1] = x
    return out


def integrate(
    sys: DynSystem,
    x0,
    duration: float,
    dt: float = 0.002,
    noise: float = 0.002,
    rng: np.random.Generator | int | None = None,
    window: int = 9,
    polyorder: int = 3,
) -> Trajectory:
    """Simulate, add multiplicative noise ``x (1 + eta)``, and differentiate."""
    if not dt > 0 or not duration >= dt:
        raise ValueError("need dt > 0 and duration >= dt")
    n_steps = int(round(duration / dt))
    states = rk4(sys.rhs, x0, n_steps, dt)
    rng = np.random.default_rng(rng)
    noisy = states * (1.0 + noise * rng.standard_normal(states.shape)) if noise else states.copy()
    derivs = smoothed_derivative(noisy, dt, window, polyorder) if states.shape[0] > window else np.full_like(states, np.nan)
    return Trajectory(np.arange(n_steps + 1) * dt, states, noisy, derivs, dt)


def monomial_exponents(d: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors of all monomials of total degree <= ``degree``, graded-lex."""
    out = []
    for deg in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), deg):
            e = [0] * d
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def _monomial_name(e: Sequence[int], names: Sequence[str]) -> str:
    parts = [n if p == 1 else f"{n}^{p}" for n, p in zip(names, e) if p]
    return " ".join(parts) if parts else "1"


def monomial_library(states, max_degree: int, names: Sequence[str] | None = None):
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    d = states.shape[1]
    names = tuple(names) if names else tuple(f"x{i}" for i in range(d))
    exps = monomial_exponents(d, max_degree)
    feats = np.empty((states.shape[0], len(exps)))
    for c, e in enumerate(exps):
        col = np.ones(states.shape[0])
        for i, p in enumerate(e):
            if p:
                col = col * states[:, i] ** p
        feats[:, c] = col
    return feats, [_monomial_name(e, names) for e in exps]


def smoothed_derivative(states, dt: float, window: int = 9, polyorder: int = 3) -> np.ndarray:
    """Slope of a local least-squares polynomial fit; edges use one-sided windows.

    A quadratic fit has the same centered slope as a straight line, so its
    error scales with the third derivative; the cubic default removes that term.
    """
    states = np.asarray(states, dtype=float)
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and >= 3")
    if not 1 <= polyorder < window:
        raise ValueError("need 1 <= polyorder < window")
    if states.shape[0] <= window:
        raise ValueError(f"need more than {window} samples, got {states.shape[0]}")
    return savgol_filter(states, window, polyorder, deriv=1, delta=dt, axis=0, mode="interp")


def aicc(sse: float, n: int, k: int) -> float:
    sse = max(sse, np.finfo(float).tiny * n)
    denom = n - k - 1
    corr = 2.0 * k * (k + 1) / denom if denom > 0 else math.inf
    return n * math.log(sse / n) + 2 * k + corr


@dataclass
class CellResult:
    dim: int
    k: int
    lambda2: float
    status: str
    support: list[int]
    coeffs: list[float]
    loss: float
    gap: float
    sse_val: float
    aicc: float
    elapsed_s: float
    failed: bool = False
    error: str | None = None


@dataclass
class DimensionResult:
    dim: int
    selected: CellResult | None
    solution: SparseSolution | None
    tpr: float
    l2_err: float
    true_sparsity: int


@dataclass
class DiscoveryResult:
    system: str
    library_size: int
    names: list[str]
    dims: list[DimensionResult]
    cells: list[CellResult]
    tpr: float
    l2_err: float
    rmse: float
    n_train: int
    n_val: int

    @property
    def selected_sparsity(self) -> tuple[int, ...]:
        return tuple(len(d.solution.support) if d.solution else 0 for d in self.dims)

    def coefficient_matrix(self) -> np.ndarray:
        out = np.zeros((len(self.dims), self.library_size))
        for i, d in enumerate(self.dims):
            if d.solution is not None:
                out[i] = d.solution.dense(self.library_size)
        return out


def _nonzero(sol: SparseSolution) -> SparseSolution:
    keep = [i for i, c in enumerate(sol.coeffs) if c != 0]
    return SparseSolution(tuple(sol.support[i] for i in keep), sol.coeffs[keep], sol.loss)


def derivative_rmse(sys: DynSystem, coef: np.ndarray, degree: int, duration: float, dt: float,
                    n_sims: int, rng: np.random.Generator) -> float:
    """RMSE of library-predicted vs true derivatives on fresh noiseless simulations."""
    errs = []
    for _ in range(n_sims):
        states = rk4(sys.rhs, sys.sample_x0(rng), int(round(duration / dt)), dt)
        feats, _ = monomial_library(states, degree)
        errs.append((feats @ coef.T - sys.rhs(states)).ravel())
    e = np.concatenate(errs)
    return float(np.sqrt(np.mean(e**2)))


def discover(
    traj: Trajectory,
    sys: DynSystem,
    degree: int = 5,
    k_grid: Sequence[int] = K_GRID,
    lambda_grid: Sequence[float] = LAMBDA_GRID,
    time_limit_per_fit: float | None = 30.0,
    train_frac: float = 2.0 / 3.0,
    n_eval_sims: int = 10,
    eval_duration: float | None = None,
    seed: int | None = 0,
    beam_width: int = 50,
    dims: Sequence[int] | None = None,
) -> DiscoveryResult:
    """Grid-search certified sparse fits per dimension and select by AICc.

    ``dims`` restricts the search to some state dimensions; the others are
    reported with no model.
    """
    truth = sys.true_coeffs(degree)
    feats, names = monomial_library(traj.noisy_states, degree, sys.var_names)
    T = feats.shape[0]
    n_train = int(T * train_frac)
    n_val = T - n_train
    Xtr, Xv = feats[:n_train], feats[n_train:]
    # unit-norm columns keep the Gram matrix usable at degree 5
    scale = np.linalg.norm(Xtr, axis=0)
    scale[scale == 0] = 1.0
    Xs = Xtr / scale

    eig = None
    cells: list[CellResult] = []
    dims_out: list[DimensionResult] = []
    wanted = set(range(sys.dim)) if dims is None else {int(i) for i in dims}
    for i in range(sys.dim):
        if i not in wanted:
            dims_out.append(DimensionResult(i, None, None, 0.0, math.nan, sys.true_sparsity[i]))
            continue
        pd = build_problem(Xs, traj.derivatives[:n_train, i])
        if eig is None:
            eig = compute_eigen_info(pd)
        dim_cells = []
        for lam2 in lambda_grid:
            cache = SupportCache()
            for k in k_grid:
                t0 = time.perf_counter()
                try:
                    cfg = SolverConfig(k=k, lambda2=lam2, time_limit_s=time_limit_per_fit,
                                       beam_width=beam_width)
                    res = solve(pd, cfg, eig=eig, cache=cache)
                except (InfeasibleConfigError, np.linalg.LinAlgError, ValueError) as exc:
                    log.warning("cell dim=%d k=%d lambda2=%g failed: %s", i, k, lam2, exc)
                    dim_cells.append(CellResult(i, k, lam2, "Failed", [], [], math.nan, math.nan,
                                                math.nan, math.inf, time.perf_counter() - t0, True, str(exc)))
                    continue
                sol = _nonzero(res.best)
                coeffs = sol.coeffs / scale[list(sol.support)]
                pred = Xv[:, list(sol.support)] @ coeffs
                sse = float(np.sum((traj.derivatives[n_train:, i] - pred) ** 2))
                dim_cells.append(CellResult(
                    i, k, lam2, res.status.value, list(sol.support), coeffs.tolist(), res.upper,
                    res.gap, sse, aicc(sse, n_val, len(sol.support)), res.elapsed_s))
                if res.status is Status.TIME_LIMIT:
                    log.info("cell dim=%d k=%d lambda2=%g hit the time limit (gap %.2e)", i, k, lam2, res.gap)
        cells.extend(dim_cells)
        ok = [c for c in dim_cells if not c.failed]
        if not ok:
            dims_out.append(DimensionResult(i, None, None, 0.0, math.nan, sys.true_sparsity[i]))
            continue
        chosen = min(ok, key=lambda c: (c.aicc, c.k, c.lambda2))
        sol = SparseSolution(tuple(chosen.support), np.array(chosen.coeffs), chosen.loss)
        tpr, l2 = recovery_metrics(sol, truth[i])
        dims_out.append(DimensionResult(i, chosen, sol, tpr, l2, sys.true_sparsity[i]))

    coef = np.zeros_like(truth)
    for d in dims_out:
        if d.solution is not None:
            coef[d.dim] = d.solution.dense(truth.shape[1])
    true_set = {(i, j) for i, j in zip(*np.nonzero(truth))}
    got_set = {(i, j) for i, j in zip(*np.nonzero(coef))}
    denom = len(true_set) + len(got_set - true_set)
    tpr = len(got_set & true_set) / denom if denom else 0.0
    l2 = float(np.sum((coef - truth) ** 2))
    rmse = math.nan
    if n_eval_sims and sys.sample_x0 is not None:
        duration = eval_duration if eval_duration is not None else traj.times[-1]
        rmse = derivative_rmse(sys, coef, degree, duration, traj.dt, n_eval_sims, np.random.default_rng(seed))
    return DiscoveryResult(sys.name, len(names), names, dims_out, cells, tpr, l2, rmse, n_train, n_val)
