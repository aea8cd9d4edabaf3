import numpy as np
import pytest

from okbnb.core import (
    InfeasibleConfigError,
    ProblemData,
    SingularSystemError,
    SolverConfig,
    SparseSolution,
    build_problem,
    evaluate_loss,
    fit_support,
    gradient,
    ridge_solve,
)


class TestProblemData:
    def test_build_matches_definitions(self, rng):
        X = rng.standard_normal((30, 5))
        y = rng.standard_normal(30)
        pd = build_problem(X, y)
        np.testing.assert_allclose(pd.gram, X.T @ X)
        np.testing.assert_allclose(pd.xty, X.T @ y)
        assert pd.yty == pytest.approx(y @ y)
        assert (pd.n, pd.p) == (30, 5)

    def test_arrays_are_read_only(self, rng):
        pd = build_problem(rng.standard_normal((5, 3)), rng.standard_normal(5))
        with pytest.raises(ValueError):
            pd.gram[0, 0] = 1.0

    @pytest.mark.parametrize(
        "gram, xty",
        [
            (np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2)),
            (np.eye(2), np.zeros(3)),
            (np.array([[np.nan, 0.0], [0.0, 1.0]]), np.zeros(2)),
        ],
    )
    def test_rejects_bad_gram(self, gram, xty):
        with pytest.raises(ValueError):
            ProblemData.from_gram(gram, xty)

    def test_rejects_mismatched_lengths(self, rng):
        with pytest.raises(ValueError):
            build_problem(rng.standard_normal((4, 2)), rng.standard_normal(5))


class TestLoss:
    def test_loss_plus_yty_is_rss(self, rng):
        X = rng.standard_normal((25, 4))
        y = rng.standard_normal(25)
        beta = rng.standard_normal(4)
        pd = build_problem(X, y)
        lam = 0.3
        expected = np.sum((y - X @ beta) ** 2) + lam * beta @ beta
        assert evaluate_loss(pd, beta, lam) + pd.yty == pytest.approx(expected)

    def test_gradient_matches_finite_differences(self, rng):
        pd = build_problem(rng.standard_normal((20, 4)), rng.standard_normal(20))
        beta = rng.standard_normal(4)
        h = 1e-6
        fd = [
            (evaluate_loss(pd, beta + h * e, 0.5) - evaluate_loss(pd, beta - h * e, 0.5)) / (2 * h)
            for e in np.eye(4)
        ]
        np.testing.assert_allclose(gradient(pd, beta, 0.5), fd, rtol=1e-6, atol=1e-6)

    def test_identity_example(self, identity_problem):
        assert evaluate_loss(identity_problem, [0.0, 2.0], 0.0) == pytest.approx(-4.0)


class TestRidgeSolves:
    def test_fit_support_is_stationary(self, rng):
        pd = build_problem(rng.standard_normal((30, 6)), rng.standard_normal(30))
        sol = fit_support(pd, 0.1, (1, 3, 4))
        g = gradient(pd, sol.dense(6), 0.1)
        np.testing.assert_allclose(g[[1, 3, 4]], 0.0, atol=1e-9)
        assert sol.loss == pytest.approx(evaluate_loss(pd, sol.dense(6), 0.1))

    def test_empty_support(self, rng):
        pd = build_problem(rng.standard_normal((10, 3)), rng.standard_normal(10))
        sol = fit_support(pd, 0.0, ())
        assert sol.support == () and sol.loss == 0.0

    def test_ridge_solve_respects_avoid(self, rng):
        pd = build_problem(rng.standard_normal((30, 5)), rng.standard_normal(30))
        gamma = ridge_solve(pd, 0.2, avoid=(0, 2))
        assert gamma[0] == 0 and gamma[2] == 0
        np.testing.assert_allclose(gradient(pd, gamma, 0.2)[[1, 3, 4]], 0.0, atol=1e-9)

    def test_duplicate_columns_need_jitter(self):
        X = np.ones((5, 2))
        pd = build_problem(X, np.arange(5.0))
        sol = fit_support(pd, 0.0, (0, 1))
        assert np.all(np.isfinite(sol.coeffs))

    def test_zero_gram_without_ridge_raises(self):
        pd = ProblemData.from_gram(np.zeros((2, 2)), np.ones(2))
        with pytest.raises(SingularSystemError):
            fit_support(pd, 0.0, (0,))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(k=0), dict(k=-1), dict(k=2, lambda2=-1.0), dict(k=1, gap_tol=0.0), dict(k=1, beam_width=0),
         dict(k=1, time_limit_s=0.0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InfeasibleConfigError):
            SolverConfig(**kwargs)

    def test_k_larger_than_p(self, identity_problem):
        with pytest.raises(InfeasibleConfigError):
            SolverConfig(k=3).check(identity_problem)

    def test_sparse_solution_round_trip(self):
        beta = np.array([0.0, 1.5, 0.0, -2.0])
        sol = SparseSolution.from_dense(beta, loss=-1.0)
        assert sol.support == (1, 3)
        np.testing.assert_array_equal(sol.dense(4), beta)
