import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stmkit.evaluation import (CSV_COLUMNS, aligned_l1_loss, l1_cost_matrix, loglog_slope,
                               permutation_loss, results_to_csv, sweep_rate, sweep_sparsity)
from stmkit.model import ModelError
from stmkit.synthgen import SynthConfig


def exhaustive_min(A_hat, A_ref):
    cost = l1_cost_matrix(A_hat, A_ref)
    K = cost.shape[0]
    return min(permutation_loss(cost, perm) for perm in itertools.permutations(range(K))) / K


def random_pair(seed, p=15, K=4):
    r = np.random.default_rng(seed)
    return r.dirichlet(np.ones(p), size=K).T, r.dirichlet(np.ones(p), size=K).T


def test_identical_matrices():
    A = random_pair(0)[0]
    loss, perm = aligned_l1_loss(A, A)
    assert loss == 0.0 and perm.tolist() == [0, 1, 2, 3]


def test_swapped_columns():
    A = random_pair(1)[0]
    swapped = A[:, [1, 0, 2, 3]]
    loss, perm = aligned_l1_loss(swapped, A)
    assert loss == 0.0 and perm.tolist() == [1, 0, 2, 3]


def test_matches_exhaustive_search():
    for seed in range(20):
        A_hat, A = random_pair(seed)
        assert aligned_l1_loss(A_hat, A)[0] == exhaustive_min(A_hat, A)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 5))
def test_alignment_properties(seed, K):
    A_hat, A = random_pair(seed, p=10, K=K)
    loss, _ = aligned_l1_loss(A_hat, A)
    assert loss <= np.abs(A_hat - A).sum() / K + 1e-15
    assert loss == pytest.approx(aligned_l1_loss(A, A_hat)[0], abs=1e-14)
    shuffle = np.random.default_rng(seed).permutation(K)
    assert loss == pytest.approx(aligned_l1_loss(A_hat[:, shuffle], A[:, shuffle])[0], abs=1e-14)


def test_dimension_mismatch():
    with pytest.raises(ModelError):
        aligned_l1_loss(np.ones((3, 2)) / 3, np.ones((4, 2)) / 4)


TINY = SynthConfig(p=40, n=60, K=3, N=100, anchors_per_topic=2, seed=11)


def test_sparsity_sweep_shape():
    results = sweep_sparsity(TINY, [0.0, 0.4], reps=1, threads=1)
    assert [r.grid_value for r in results] == [0.0, 0.4]
    assert all(r.reps == 1 and r.failed == 0 and r.sd_loss == 0 for r in results)
    csv = results_to_csv(results).splitlines()
    assert csv[0].split(",") == CSV_COLUMNS
    assert len(csv) == 3


def test_rate_sweep_same_factor_is_reproducible():
    results, slope = sweep_rate(TINY, [1, 1], reps=2, threads=1)
    assert results[0].losses == results[1].losses
    assert np.isnan(slope)
    with pytest.raises(ValueError):
        sweep_rate(TINY, [0.5], reps=1)


def test_failed_repetitions_are_counted():
    # xi * anchors close to 1 leaves almost no mass for other words; an
    # impossible lambda grid then forces every repetition to fail
    from stmkit.estimator import STMConfig
    results = sweep_sparsity(TINY, [0.0], reps=2, stm_cfg=STMConfig(t_min=0, t_max=0, force_lambda=-1e9), threads=1)
    assert results[0].failed == 2 and results[0].reps == 0


def test_loglog_slope():
    x = np.array([1.0, 10.0, 100.0])
    assert loglog_slope(x, 3 * x ** -0.5) == pytest.approx(-0.5)
