import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mfdr import standardize

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: list[tuple[str, bool, str]] = []


def orthonormal_design(n, p, seed=0):
    """Centered X with X'X/n = I exactly (to rounding)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, p))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    return Q * np.sqrt(n)


@pytest.fixture
def ortho_ds():
    X = orthonormal_design(100, 50, seed=1)
    rng = np.random.default_rng(2)
    beta = np.zeros(50)
    beta[:5] = [1.0, -0.8, 0.6, 0.4, -0.3]
    y = X @ beta + rng.standard_normal(100)
    return standardize(X, y)


@pytest.fixture(scope="session")
def criterion_log():
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
