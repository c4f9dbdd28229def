import numpy as np
import pytest

from guarantee_pi.model_core import Dataset, fit_ols


def gaussian_elimination_solve(A, b):
    """Dense solve with partial pivoting in pure Python."""
    n = len(b)
    M = [list(map(float, A[i])) + [float(b[i])] for i in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        M[col], M[piv] = M[piv], M[col]
        for r in range(col + 1, n):
            f = M[r][col] / M[col][col]
            for c in range(col, n + 1):
                M[r][c] -= f * M[col][c]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        x[r] = (M[r][n] - sum(M[r][c] * x[c] for c in range(r + 1, n))) / M[r][r]
    return np.array(x)


def loo_residuals_brute_force(X, y):
    """Raw leave-one-out residuals by ``n`` explicit refits."""
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        beta = np.linalg.lstsq(X[keep], y[keep], rcond=None)[0]
        out[i] = y[i] - X[i] @ beta
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def experiment_like(rng):
    n, p = 120, 4
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    beta = np.array([1.0, 0.5, -1.0, -0.5])
    y = X @ beta + rng.standard_normal(n)
    return fit_ols(Dataset(X, y)), np.array([1.0, 0.1, 0.2, 0.3])


# One "PASS/FAIL" line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture(scope="session")
def acceptance_report():
    def record(key: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[key] = f"{'PASS' if passed else 'FAIL'}  {key}: {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
