import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def dense_kernel(family, lengthscales, output_scale, A, B):
    """Pairwise loop kernel; shares no code with the package implementation."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    ls = np.asarray(lengthscales, float)
    K = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            r = math.sqrt(float(np.sum(((A[i] - B[j]) / ls) ** 2)))
            if family == "rbf":
                K[i, j] = output_scale * math.exp(-0.5 * r * r)
            else:
                K[i, j] = output_scale * (1 + math.sqrt(5) * r + 5 * r * r / 3) * math.exp(-math.sqrt(5) * r)
    return K


def dense_posterior(family, lengthscales, output_scale, X, y, lam, Q):
    """Posterior mean and variance from plain dense solves against K + lam I."""
    K = dense_kernel(family, lengthscales, output_scale, X, X) + lam * np.eye(len(y))
    Ks = dense_kernel(family, lengthscales, output_scale, Q, X)
    mean = Ks @ np.linalg.solve(K, y)
    var = output_scale - np.einsum("ij,ji->i", Ks, np.linalg.solve(K, Ks.T))
    return mean, np.maximum(var, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
