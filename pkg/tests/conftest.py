import itertools

import numpy as np
import pytest

from okbnb.core import build_problem, fit_support


def random_problem(rng, n=40, p=8, rho=0.3):
    X = rng.standard_normal((n, p))
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + np.sqrt(1 - rho**2) * X[:, j]
    beta = np.zeros(p)
    beta[rng.choice(p, size=min(3, p), replace=False)] = rng.uniform(0.5, 2.0, size=min(3, p))
    y = X @ beta + 0.5 * rng.standard_normal(n)
    return build_problem(X, y)


def subtree_optimum(pd, lambda2, k, select=(), avoid=()):
    """Best size-k loss over supports containing select and missing avoid."""
    free = [j for j in range(pd.p) if j not in set(select) | set(avoid)]
    best = np.inf
    for extra in itertools.combinations(free, k - len(select)):
        best = min(best, fit_support(pd, lambda2, tuple(sorted(tuple(select) + extra))).loss)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def identity_problem():
    """Two orthonormal columns with X'y = (1, 2): the k = 1 optimum is -4 on {1}."""
    from okbnb.core import ProblemData

    return ProblemData.from_gram(np.eye(2), np.array([1.0, 2.0]), yty=5.0, n=2)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
