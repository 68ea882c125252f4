import logging

import numpy as np
import pytest

from stmkit.estimator import (EstimationError, STMConfig, anchor_rows, check_report, estimate_B,
                              group_average_moments, lambda_grid_unit, lambda_select, normalize_to_A,
                              recover_from_population, run_stm, threshold_cutoff, threshold_set)
from stmkit.model import AnchorPartition, CorpusCounts, TopicMatrix, population_moments
from stmkit.synthgen import SynthConfig, make_dataset

from conftest import random_instance


@pytest.fixture(scope="module")
def small_data():
    return make_dataset(SynthConfig(p=80, n=150, K=4, N=300, anchors_per_topic=2, seed=3, eta=0.5))


def test_anchor_rows():
    B = anchor_rows(AnchorPartition(([0], [2])), 3)
    np.testing.assert_array_equal(B[0], [1, 0])
    np.testing.assert_array_equal(B[2], [0, 1])
    assert np.all(np.isnan(B[1]))
    B = anchor_rows(AnchorPartition(([0, 1], [2])), 3)
    np.testing.assert_array_equal(B[:2], [[1, 0], [1, 0]])


def test_group_average_example():
    R = np.array([[1, 2, 3], [2, 1, 3], [3, 3, 5]], dtype=float)
    mix = group_average_moments(R, np.zeros((3, 0)), AnchorPartition(([0, 1], [2])))
    np.testing.assert_allclose(mix.m_hat, [[1.5, 3], [3, 5]])


def test_group_average_singletons(rng):
    R = rng.uniform(size=(3, 3))
    R = R + R.T
    Rc = rng.uniform(size=(3, 4))
    mix = group_average_moments(R, Rc, AnchorPartition(([0], [1], [2])))
    np.testing.assert_allclose(mix.m_hat, R)
    np.testing.assert_allclose(mix.h_hat, Rc)


def test_group_average_of_population_R_is_M(rng):
    A, W, anchors = random_instance(rng, p=25, K=3, n=80, anchors_per_topic=2)
    pm = population_moments(A, W)
    L = anchors.indices
    mix = group_average_moments(pm.R[np.ix_(L, L)], pm.R[L], anchors)
    np.testing.assert_allclose(mix.m_hat, pm.M, rtol=1e-12)


def test_threshold_cutoff_example():
    cut = threshold_cutoff(100, 100, 50)
    assert cut == pytest.approx(6.447e-3, rel=1e-3)
    d = np.full(100, 0.02)
    d[5], d[6], d[7] = 5e-3, 8e-3, 0.0
    T = threshold_set(d, 100, 100, 50)
    assert 5 in T and 7 in T and 6 not in T
    assert threshold_set(np.full(100, 0.01), 100, 100, 50).size == 0


def test_threshold_never_removes_anchors():
    d = np.array([0.0, 0.5, 0.0, 0.5])
    assert threshold_set(d, 100, 4, 50, AnchorPartition(([0], [1]))).tolist() == [2]


def test_lambda_zero_when_invertible():
    lam, t = lambda_select(np.eye(2), np.full(100, 0.01), AnchorPartition(([0], [1])), np.full(100, 50))
    assert (lam, t) == (0.0, 0)


def test_lambda_grid_example():
    anchors = AnchorPartition(([0], [1]))
    d = np.full(100, 0.01)
    lengths = np.full(100, 50)
    expected = 0.01 * 2 * np.sqrt(2 * np.log(100) / (0.01 * 100) * (1 / 50))
    assert expected == pytest.approx(8.58e-3, rel=1e-3)
    lam, t = lambda_select(np.zeros((2, 2)), d, anchors, lengths)
    assert t == 1 and lam == pytest.approx(expected, rel=1e-14)
    assert lambda_grid_unit(d, anchors, lengths) == pytest.approx(expected, rel=1e-14)
    lam3, t3 = lambda_select(np.zeros((2, 2)), d, anchors, lengths, t_min=3)
    assert t3 == 3 and lam3 == pytest.approx(3 * expected, rel=1e-14)


def test_lambda_grid_uses_largest_dimension():
    anchors = AnchorPartition(([0], [1]))
    d = np.full(400, 0.01)
    lengths = np.full(100, 50)
    # p = 400 > n = 100, so log(max(n, p)) = log(400)
    expected = 0.01 * 2 * np.sqrt(2 * np.log(400) / (0.01 * 100) * (1 / 50))
    assert lambda_grid_unit(d, anchors, lengths) == pytest.approx(expected, rel=1e-14)


def test_lambda_exhaustion_and_zero_anchor():
    anchors = AnchorPartition(([0], [1]))
    with pytest.raises(EstimationError):
        lambda_select(-np.eye(2), np.full(10, 0.1), anchors, np.full(10, 50), t_max=2)
    with pytest.raises(EstimationError):
        lambda_select(np.zeros((2, 2)), np.array([0.0, 0.5, 0.5]), anchors, np.full(10, 50))


def test_normalize_examples():
    np.testing.assert_allclose(normalize_to_A([0.3, 0.7], np.eye(2)).entries, np.eye(2))
    A = normalize_to_A(np.full(4, 0.25), np.full((4, 2), 0.5)).entries
    np.testing.assert_allclose(A, 0.25)
    with pytest.raises(EstimationError, match="topic 1"):
        normalize_to_A([0.5, 0.5], np.array([[1.0, 0.0], [1.0, 0.0]]))


def test_noise_free_B_is_exact(rng):
    for _ in range(5):
        A, W, anchors = random_instance(rng, p=40, K=4, n=100, anchors_per_topic=2)
        pm = population_moments(A, W)
        A_hat, B_hat, _ = recover_from_population(pm, anchors)
        np.testing.assert_allclose(B_hat, pm.B, atol=1e-8)
        assert np.abs(A_hat.entries - A.entries).sum() <= 1e-8


def test_noise_free_sparse_A(rng):
    A, W, anchors = random_instance(rng, p=40, K=4, n=100)
    a = A.entries.copy()
    a[10:, 0] *= rng.uniform(size=30) < 0.4
    a /= a.sum(axis=0)
    A = TopicMatrix(a)
    A_hat, _, _ = recover_from_population(population_moments(A, W), anchors)
    assert np.abs(A_hat.entries - a).sum() <= 1e-8


def test_word_never_occurring_gets_zero_row(small_data):
    counts = small_data.corpus.counts.copy()
    counts = np.vstack([counts, np.zeros((1, counts.shape[1]), dtype=int)])
    est = estimate_B(CorpusCounts(counts), small_data.anchors)
    assert counts.shape[0] - 1 in est.thresholded
    np.testing.assert_array_equal(est.B_hat[-1], 0.0)


def test_estimate_invariants(small_data):
    report = run_stm(small_data.corpus, small_data.anchors)
    assert check_report(report, small_data.anchors) == []
    kept = report.mixing.lcomp
    np.testing.assert_allclose(report.B_hat[kept].sum(axis=1), 1.0, atol=1e-10)
    for k, g in enumerate(small_data.anchors.groups):
        np.testing.assert_array_equal(report.B_hat[list(g)], np.eye(4)[[k] * len(g)])


def test_run_is_deterministic(small_data):
    r1 = run_stm(small_data.corpus, small_data.anchors)
    r2 = run_stm(small_data.corpus, small_data.anchors)
    assert np.array_equal(r1.A_hat.entries, r2.A_hat.entries)


def test_forced_lambda_and_ridge_branch(small_data):
    r = run_stm(small_data.corpus, small_data.anchors, STMConfig(force_lambda=0.05))
    assert r.lambda_used == 0.05 and r.t_star is None
    r = run_stm(small_data.corpus, small_data.anchors, STMConfig(t_min=1))
    assert r.t_star == 1 and r.lambda_used > 0
    assert check_report(r, small_data.anchors) == []


def test_permutation_equivariance(small_data, rng):
    p = small_data.corpus.p
    perm = rng.permutation(p)  # word j moves to row perm[j]
    counts = np.empty_like(small_data.corpus.counts)
    counts[perm] = small_data.corpus.counts
    r0 = run_stm(small_data.corpus, small_data.anchors)
    r1 = run_stm(CorpusCounts(counts), small_data.anchors.permuted(perm))
    np.testing.assert_allclose(r1.A_hat.entries[perm], r0.A_hat.entries, rtol=1e-9, atol=1e-13)
    assert sorted(perm[r0.thresholded].tolist()) == r1.thresholded.tolist()


def test_weak_anchor_warns(small_data, caplog):
    counts = small_data.corpus.counts.copy()
    anchor = small_data.anchors.groups[0][0]
    # keep a single occurrence of the anchor; move the rest to the last word
    doc = int(np.argmax(counts[anchor]))
    counts[-1] += counts[anchor]
    counts[anchor] = 0
    counts[anchor, doc] = 1
    counts[-1, doc] -= 1
    with caplog.at_level(logging.WARNING):
        est = estimate_B(CorpusCounts(counts), small_data.anchors)
    assert any("below the frequency cutoff" in w for w in est.warnings)
    np.testing.assert_array_equal(est.B_hat[anchor], np.eye(4)[0])


def test_strict_mode_raises_on_nonconvergence(small_data):
    with pytest.raises(EstimationError):
        run_stm(small_data.corpus, small_data.anchors, STMConfig(max_iter=1, tol=0.0, strict=True))
