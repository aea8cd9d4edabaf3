import math

import numpy as np
import pytest

import okbnb.bnb as bnb
from okbnb.bnb import Status, branch_coordinate, relative_gap, solve
from okbnb.core import InfeasibleConfigError, SolverConfig, build_problem, fit_support
from okbnb.datagen import SyntheticSpec, brute_force_optimum, generate

from conftest import random_problem, subtree_optimum


class TestGap:
    @pytest.mark.parametrize(
        "upper, lower, expected",
        [(-4.0, -4.0, 0.0), (-4.0, -5.0, 0.25), (-4.0, -3.0, 0.0), (0.0, -1.0, math.inf), (0.0, 0.0, 0.0)],
    )
    def test_relative_gap(self, upper, lower, expected):
        assert relative_gap(upper, lower) == expected


class TestBranching:
    def test_picks_largest_loss_increase(self, rng):
        pd = random_problem(rng)
        sol = fit_support(pd, 0.1, (0, 2, 5))
        j = branch_coordinate(pd, SolverConfig(k=3, lambda2=0.1), sol, select=())
        # the score equals the loss increase from zeroing one coefficient
        beta = sol.dense(pd.p)
        from okbnb.core import evaluate_loss

        def increase(i):
            b = beta.copy()
            b[i] = 0.0
            return evaluate_loss(pd, b, 0.1) - sol.loss

        assert j == max(sol.support, key=increase)

    def test_skips_forced_in(self, rng):
        pd = random_problem(rng)
        sol = fit_support(pd, 0.1, (0, 2))
        assert branch_coordinate(pd, SolverConfig(k=2, lambda2=0.1), sol, select=(0,)) == 2
        with pytest.raises(ValueError):
            branch_coordinate(pd, SolverConfig(k=2), sol, select=(0, 2))


class TestSolve:
    def test_identity_example(self, identity_problem):
        res = solve(identity_problem, SolverConfig(k=1))
        assert res.status is Status.OPTIMAL
        assert res.upper == pytest.approx(-4.0)
        assert res.best.support == (1,)
        assert res.nodes_processed == 1 and res.gap == 0.0

    def test_matches_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            pd = random_problem(rng, n=int(rng.choice([8, 50])), p=9, rho=float(rng.choice([0.2, 0.9])))
            cfg = SolverConfig(k=int(rng.integers(1, 5)), lambda2=float(rng.choice([0.0, 0.01, 1.0])))
            res = solve(pd, cfg)
            opt = brute_force_optimum(pd, cfg).loss
            assert res.upper == pytest.approx(opt, rel=1e-8, abs=1e-10)
            assert res.lower <= res.upper and res.gap <= cfg.gap_tol

    def test_k_equals_p(self, rng):
        pd = random_problem(rng, p=4)
        res = solve(pd, SolverConfig(k=4, lambda2=0.1))
        assert res.best.support == (0, 1, 2, 3)
        assert res.upper == pytest.approx(fit_support(pd, 0.1, range(4)).loss)

    def test_zero_response(self, rng):
        pd = build_problem(rng.standard_normal((10, 4)), np.zeros(10))
        res = solve(pd, SolverConfig(k=2))
        assert res.status is Status.OPTIMAL and res.upper == 0.0

    def test_k_too_large(self, rng):
        with pytest.raises(InfeasibleConfigError):
            solve(random_problem(rng, p=3), SolverConfig(k=4))

    def test_deterministic(self):
        X, y, _ = generate(SyntheticSpec(n=60, p=30, k_true=5, rho=0.8, seed=2))
        pd = build_problem(X, y)
        cfg = SolverConfig(k=5, lambda2=0.01)
        a, b = solve(pd, cfg), solve(pd, cfg)
        assert (a.upper, a.nodes_processed, a.nodes_pruned, a.best.support) == (
            b.upper, b.nodes_processed, b.nodes_pruned, b.best.support)


class TestSafety:
    def test_every_node_bound_is_valid(self, monkeypatch):
        """Pruning is safe when no evaluated node bound exceeds its subtree optimum."""
        seen = []
        fast, admm = bnb.fast_lower_bound, bnb.admm_lower_bound

        def fast_spy(pd, cfg, select, avoid, eig):
            out = fast(pd, cfg, select, avoid, eig)
            seen.append((tuple(select), tuple(avoid), out[0]))
            return out

        def admm_spy(pd, cfg, select, avoid, eig, gamma, fb):
            out = admm(pd, cfg, select, avoid, eig, gamma, fb)
            seen.append((tuple(select), tuple(avoid), out))
            return out

        monkeypatch.setattr(bnb, "fast_lower_bound", fast_spy)
        monkeypatch.setattr(bnb, "admm_lower_bound", admm_spy)
        rng = np.random.default_rng(8)
        for _ in range(6):
            pd = random_problem(rng, n=12, p=9, rho=0.9)
            cfg = SolverConfig(k=3, lambda2=0.01)
            seen.clear()
            res = solve(pd, cfg)
            assert len(seen) > 2
            for select, avoid, bound in seen:
                opt = subtree_optimum(pd, cfg.lambda2, cfg.k, select, avoid)
                assert bound <= opt + 1e-9 * max(1.0, abs(opt))
            assert res.upper == pytest.approx(brute_force_optimum(pd, cfg).loss, rel=1e-8)

    def test_anytime_bounds_bracket_optimum(self):
        rng = np.random.default_rng(9)
        pd = random_problem(rng, n=15, p=12, rho=0.9)
        cfg = SolverConfig(k=4, lambda2=0.001)
        opt = brute_force_optimum(pd, cfg).loss
        trace = []
        solve(pd, cfg, callback=lambda *a: trace.append(a))
        assert trace
        for processed, upper, lower, gap, elapsed in trace:
            assert lower <= opt + 1e-9 * abs(opt) and upper >= opt - 1e-9 * abs(opt)
        assert [t[0] for t in trace] == sorted(t[0] for t in trace)

    def test_time_limit_reports_certified_bound(self):
        X, y, _ = generate(SyntheticSpec(n=40, p=60, k_true=6, rho=0.9, seed=4))
        pd = build_problem(X, y)
        cfg = SolverConfig(k=6, lambda2=1e-4, gap_tol=1e-12, time_limit_s=0.3)
        res = solve(pd, cfg)
        assert res.status is Status.TIME_LIMIT
        assert res.lower <= res.upper and res.gap > cfg.gap_tol
        assert res.elapsed_s < 5.0
