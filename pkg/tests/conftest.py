import numpy as np
import pytest

from stmkit.model import AnchorPartition, TopicMatrix, WeightMatrix

ACCEPTANCE_LINES = []


def random_instance(rng, p=20, K=3, n=50, anchors_per_topic=1, alpha=0.5):
    """Separable (A, W, anchors) with anchors in the first K*m rows."""
    m = anchors_per_topic
    A = np.zeros((p, K))
    groups = []
    for k in range(K):
        rows = list(range(k * m, (k + 1) * m))
        A[rows, k] = rng.uniform(0.05, 0.2, size=m)
        groups.append(rows)
    A[K * m:] = rng.uniform(size=(p - K * m, K))
    A /= A.sum(axis=0)
    W = rng.dirichlet(np.full(K, alpha), size=n).T
    return TopicMatrix(A), WeightMatrix(W), AnchorPartition(tuple(groups))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
