import numpy as np
import pytest

from rgpt.risk import RiskTable, SelectionProblem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bernoulli_table(means, n, seed=0, labels=()):
    """Table of independent Bernoulli losses with the given (H, L) means."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    if means.shape[0] == 1 and means.ndim == 2 and means.shape[1] > 1:
        means = means.T
    r = np.random.default_rng(seed)
    return RiskTable((r.random((n,) + means.shape) < means).astype(float), labels)


@pytest.fixture
def two_risk_table():
    means = np.array([[0.05, 0.9], [0.1, 0.6], [0.2, 0.3], [0.5, 0.1], [0.6, 0.6]])
    return bernoulli_table(means, 400, seed=3)


@pytest.fixture
def one_risk_problem():
    return SelectionProblem((0.3,), 0.1)
