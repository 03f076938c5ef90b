import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from specnet.data import FeatureMatrix
from specnet.errors import DegenerateScaleError, DomainError, IsolatedNodeError, ValidationError
from specnet.graph import (DistanceMatrix, SimilarityGraph, count_graph_parameters, gaussian_kernel,
                           known_graph, knn_scales, low_rank_approx, low_rank_project, median_sigma,
                           pairwise_sq_distances, self_tuning_kernel, supervised_distance)

from oracles import jacobi_eigh


def assert_similarity_invariants(g: SimilarityGraph):
    w = g.weights
    assert np.array_equal(w, w.T)
    assert np.all((w >= 0) & (w <= 1)) and np.all(np.isfinite(w))
    assert np.all(np.diag(w) == 1)
    assert np.all(w.sum(axis=1) > 0)


def test_pairwise_distance_hand_value():
    D = pairwise_sq_distances(FeatureMatrix(np.array([[1.0, 0], [0, 1]])))
    assert D.values[0, 1] == 2 and D.values[1, 0] == 2


def test_pairwise_distance_between_columns():
    X = np.array([[1.0, 2.0, 1.0], [0.0, 5.0, 0.0], [3.0, 1.0, 3.0]])
    D = pairwise_sq_distances(X)
    assert D.values[0, 2] == 0            # duplicated columns
    assert D.values[0, 1] == 1 + 25 + 4
    assert np.all(np.diag(D.values) == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 15), st.integers(0, 2**31 - 1))
def test_pairwise_distance_invariants(L, N, seed):
    X = np.random.default_rng(seed).standard_normal((L, N))
    D = pairwise_sq_distances(X).values
    brute = np.array([[np.sum((X[:, i] - X[:, j]) ** 2) for j in range(N)] for i in range(N)])
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)
    np.testing.assert_allclose(D, brute, rtol=1e-12, atol=1e-12)


def test_distance_matrix_validation():
    with pytest.raises(ValidationError):
        DistanceMatrix(np.array([[0, 1.0], [2.0, 0]]))
    with pytest.raises(ValidationError):
        DistanceMatrix(np.array([[1.0, 1.0], [1.0, 0]]))


def test_gaussian_kernel_values():
    D = DistanceMatrix(np.array([[0, 4.0], [4.0, 0]]))
    g = gaussian_kernel(D, sigma=2.0)
    assert g.weights[0, 0] == 1.0
    assert abs(g.weights[0, 1] - np.exp(-1)) < 1e-15
    assert abs(np.exp(-1) - 0.367879) < 1e-6
    assert_similarity_invariants(g)


def test_gaussian_kernel_rejects_bad_sigma():
    D = DistanceMatrix(np.zeros((2, 2)))
    for s in (0.0, -1.0):
        with pytest.raises(DomainError):
            gaussian_kernel(D, s)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 10.0))
def test_gaussian_kernel_monotone(seed, sigma):
    d = np.sort(np.random.default_rng(seed).uniform(0, 50, 20))
    w =[gaussian_kernel(DistanceMatrix(np.array([[0, v], [v, 0]])), sigma).weights[0, 1] for v in d]
    assert all(a >= b for a, b in zip(w, w[1:]))


def test_median_sigma_default():
    D = DistanceMatrix(np.array([[0, 1, 4], [1, 0, 9], [4, 9, 0.0]]))
    assert median_sigma(D) == 2.0
    assert gaussian_kernel(D).info["sigma"] == 2.0


def test_self_tuning_hand_example():
    D = DistanceMatrix(np.array([[0, 1, 4], [1, 0, 9], [4, 9, 0.0]]))
    np.testing.assert_array_equal(knn_scales(D, 1), [1, 1, 4])
    g = self_tuning_kernel(D, 1)
    assert abs(g.weights[0, 2] - np.exp(-1)) < 1e-15
    assert abs(g.weights[0, 1] - np.exp(-1)) < 1e-15
    assert abs(g.weights[1, 2] - np.exp(-9 / 4)) < 1e-15
    assert_similarity_invariants(g)


def test_self_tuning_equals_global_for_equal_scales():
    n, d = 6, 2.5
    D = DistanceMatrix(np.full((n, n), d) - d * np.eye(n))
    local = self_tuning_kernel(D, 3)
    glob = gaussian_kernel(D, sigma=d)   # sigma**2 = sigma_i**2
    np.testing.assert_allclose(local.weights, glob.weights, atol=1e-12, rtol=0)


def test_self_tuning_degenerate_scale():
    X = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 5.0]])
    D = pairwise_sq_distances(X)
    with pytest.raises(DegenerateScaleError, match="feature 0"):
        self_tuning_kernel(D, 1)
    self_tuning_kernel(D, 2)


def test_self_tuning_k_range():
    D = DistanceMatrix(np.array([[0, 1.0], [1.0, 0]]))
    with pytest.raises(DomainError):
        self_tuning_kernel(D, 2)


def test_supervised_distance_values():
    D = supervised_distance(np.eye(2))
    assert D.values[0, 1] == 2
    W1 = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    assert supervised_distance(W1).values[0, 1] == 0


def test_supervised_distance_column_permutation():
    W1 = np.random.default_rng(0).standard_normal((10, 7))
    a = supervised_distance(W1).values
    b = supervised_distance(W1[:, np.random.default_rng(1).permutation(7)]).values
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_supervised_kernel_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    W1 = rng.standard_normal((12, 8))
    Q = ortho_group.rvs(8, random_state=seed)
    a = gaussian_kernel(supervised_distance(W1), 3.0).weights
    b = gaussian_kernel(supervised_distance(W1 @ Q), 3.0).weights
    np.testing.assert_allclose(a, b, atol=1e-10, rtol=0)


def _random_graph(rng, n):
    X = rng.standard_normal((20, n))
    return gaussian_kernel(pairwise_sq_distances(X))


def test_low_rank_full_rank_identity():
    g = _random_graph(np.random.default_rng(0), 10)
    assert np.linalg.norm(low_rank_approx(g, 10) - g.weights) < 1e-8
    proj = low_rank_project(g, 10)
    assert np.linalg.norm(proj.weights - g.weights) < 1e-8
    assert proj.info["m"] == 10


def test_low_rank_rank_one_input():
    g = SimilarityGraph(np.ones((5, 5)))
    np.testing.assert_allclose(low_rank_project(g, 1).weights, 1.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_low_rank_eckart_young(seed):
    rng = np.random.default_rng(seed)
    n = 8
    A = rng.standard_normal((n, n))
    W = A @ A.T
    evals, _ = jacobi_eigh(W)
    expected = np.sqrt(np.sum(evals[: n // 2] ** 2))
    assert abs(np.linalg.norm(W - low_rank_approx(W, n // 2)) - expected) < 1e-9 * max(1, expected)


def test_low_rank_repair_restores_invariants():
    g = _random_graph(np.random.default_rng(3), 15)
    for m in (1, 2, 5):
        assert_similarity_invariants(low_rank_project(g, m))
    with pytest.raises(DomainError):
        low_rank_project(g, 16)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(1, 30), st.integers(0, 2**31 - 1))
def test_estimators_produce_valid_graphs(n, L, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((L, n))
    D = pairwise_sq_distances(X)
    assert_similarity_invariants(gaussian_kernel(D))
    assert_similarity_invariants(self_tuning_kernel(D, min(3, n - 1)))
    W1 = rng.standard_normal((n, 5))
    sup = gaussian_kernel(supervised_distance(W1))
    assert_similarity_invariants(sup)
    assert_similarity_invariants(low_rank_project(sup, max(1, n // 2)))


def test_known_graph_validation():
    known_graph(np.array([[0, 2.0], [2.0, 0]]))
    with pytest.raises(ValidationError, match="not symmetric"):
        known_graph(np.array([[0, 1.0], [0.5, 0]]))
    with pytest.raises(IsolatedNodeError):
        known_graph(np.array([[0, 0.0], [0.0, 1.0]]))


@pytest.mark.parametrize("method, n, m, expected", [
    ("rbf", 2000, None, 2_000_000),
    ("rbf-local", 2000, None, 2_000_000),
    ("supervised", 2000, None, 2_000_000),
    ("supervised-lowrank", 2000, 250, 500_000),
    ("known", 2000, None, 0),
])
def test_count_graph_parameters(method, n, m, expected):
    assert count_graph_parameters(method, n, m) == expected


def test_count_graph_parameters_errors():
    with pytest.raises(DomainError):
        count_graph_parameters("mutual-information", 10)
    with pytest.raises(DomainError):
        count_graph_parameters("supervised-lowrank", 10)
