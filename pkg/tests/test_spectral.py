import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import CubicSpline

from specnet.errors import DomainError, IsolatedNodeError, ShapeError
from specnet.spectral import (SpectralBasis, build_spline_kernel, eigendecompose, fix_signs, gft, graph_basis,
                              igft, interpolate_weights, knot_positions, normalized_laplacian)

from oracles import connected_components, cycle_weights, jacobi_eigh


def test_laplacian_two_nodes():
    np.testing.assert_allclose(normalized_laplacian(np.array([[0, 1.0], [1.0, 0]])), [[1, -1], [-1, 1]])


def test_laplacian_self_loops_only():
    assert np.array_equal(normalized_laplacian(np.eye(2)), np.zeros((2, 2)))


def test_laplacian_diagonal_formula():
    rng = np.random.default_rng(0)
    W = rng.uniform(0, 1, (6, 6))
    W = (W + W.T) / 2
    L = normalized_laplacian(W)
    np.testing.assert_allclose(np.diag(L), 1 - np.diag(W) / W.sum(axis=1), atol=1e-15)
    assert np.max(np.abs(L - L.T)) <= 1e-12


def test_laplacian_isolated_node():
    W = np.array([[1.0, 1, 0], [1, 1, 0], [0, 0, 0]])
    with pytest.raises(IsolatedNodeError, match="node 2"):
        normalized_laplacian(W)


def test_four_cycle_spectrum():
    basis = graph_basis(cycle_weights(4))
    np.testing.assert_allclose(basis.eigenvalues, [0, 1, 1, 2], atol=1e-12)
    # closed form 1 - cos(2 pi r / N)
    n = 12
    expected = np.sort(1 - np.cos(2 * np.pi * np.arange(n) / n))
    np.testing.assert_allclose(graph_basis(cycle_weights(n)).eigenvalues, expected, atol=1e-12)


def test_eigendecompose_two_by_two():
    b = eigendecompose(np.array([[1.0, -1], [-1, 1]]))
    np.testing.assert_allclose(b.eigenvalues, [0, 2], atol=1e-15)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(b.U, [[s, s], [s, -s]], atol=1e-15)


def test_eigendecompose_identity():
    b = eigendecompose(np.eye(5))
    assert np.array_equal(b.eigenvalues, np.ones(5))
    assert np.array_equal(b.U, np.eye(5))


@pytest.mark.parametrize("seed", range(5))
def test_eigendecompose_reconstruction(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((9, 9))
    L = (A + A.T) / 2
    b = eigendecompose(L)
    assert np.linalg.norm(b.U.T @ np.diag(b.eigenvalues) @ b.U - L) < 1e-8
    assert np.linalg.norm(b.U @ b.U.T - np.eye(9)) < 1e-8
    oracle_vals, _ = jacobi_eigh(L)
    np.testing.assert_allclose(b.eigenvalues, oracle_vals, atol=1e-10)


def test_eigendecompose_symmetrizes_input():
    L = np.array([[2.0, 1.0 + 1e-12], [1.0, 2.0]])
    b = eigendecompose(L)
    np.testing.assert_allclose(b.eigenvalues, [1, 3], atol=1e-10)


def test_sign_convention():
    V = np.array([[0.6, -0.8], [-0.5, 0.5], [0.0, 0.0]])
    out = fix_signs(V)
    np.testing.assert_array_equal(out[0], [-0.6, 0.8])
    np.testing.assert_array_equal(out[1], [0.5, -0.5])   # tie -> first entry positive
    np.testing.assert_array_equal(out[2], [0.0, 0.0])


def test_basis_invariants_and_determinism():
    rng = np.random.default_rng(3)
    W = rng.uniform(0, 1, (20, 20))
    W = (W + W.T) / 2
    L = normalized_laplacian(W)
    a, b = eigendecompose(L), eigendecompose(L)
    assert np.array_equal(a.U, b.U)
    assert np.all(np.diff(a.eigenvalues) >= 0)
    assert a.eigenvalues[0] < 1e-8
    for r in range(20):
        assert np.linalg.norm(L @ a.U[r] - a.eigenvalues[r] * a.U[r]) < 1e-6
    rows = np.argmax(np.abs(a.U), axis=1)
    assert np.all(a.U[np.arange(20), rows] > 0)


def test_repeated_eigenvalues_compare_spans():
    # the cycle has 2-dimensional eigenspaces; compare projectors, not vectors
    L = normalized_laplacian(cycle_weights(8))
    b = eigendecompose(L)
    vals, vecs = jacobi_eigh(L)
    for r in (1, 3, 5):
        ours = b.U[r: r + 2]
        ref = vecs[:, r: r + 2].T
        assert np.linalg.norm(ours.T @ ours - ref.T @ ref) < 1e-8


def _random_graph_with_components(rng, n):
    W = np.zeros((n, n))
    labels = rng.integers(0, rng.integers(1, 5), size=n)
    for i in range(n):
        for j in range(i + 1, n):
            if labels[i] == labels[j] and rng.random() < 0.5:
                W[i, j] = W[j, i] = rng.uniform(0.2, 1.0)
    W += np.diag(rng.uniform(0.2, 1.0, n))   # self-loops keep every degree positive
    return W


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_spectrum_range_and_components(n, seed):
    W = _random_graph_with_components(np.random.default_rng(seed), n)
    b = graph_basis(W)
    assert b.eigenvalues.min() >= -1e-10 and b.eigenvalues.max() <= 2 + 1e-10
    assert np.sum(b.eigenvalues < 1e-8) == connected_components(W)


def test_gft_dc_component():
    rng = np.random.default_rng(0)
    W = rng.uniform(0.1, 1, (10, 10))
    W = (W + W.T) / 2
    b = graph_basis(W)
    x = np.sqrt(W.sum(axis=1))
    x /= np.linalg.norm(x)
    xhat = gft(b, x)
    assert abs(abs(xhat[0]) - 1) < 1e-10
    assert np.linalg.norm(xhat[1:]) < 1e-10


def test_gft_zero_and_roundtrip():
    rng = np.random.default_rng(1)
    W = rng.uniform(0.1, 1, (16, 16))
    b = graph_basis((W + W.T) / 2)
    assert np.array_equal(gft(b, np.zeros(16)), np.zeros(16))
    X = rng.standard_normal((1000, 16))
    H = gft(b, X)
    np.testing.assert_allclose(np.linalg.norm(H, axis=1), np.linalg.norm(X, axis=1), atol=1e-10)
    assert np.max(np.abs(igft(b, H) - X)) < 1e-10
    assert np.array_equal(b.gft(X[0]), gft(b, X[0]))


def test_gft_shape_error():
    b = graph_basis(np.ones((3, 3)))
    with pytest.raises(ShapeError):
        gft(b, np.zeros(4))
    with pytest.raises(ShapeError):
        igft(b, np.zeros((2, 5)))


def test_knot_positions():
    np.testing.assert_array_equal(knot_positions(10, 4), [0, 3, 6, 9])
    np.testing.assert_array_equal(knot_positions(6, 5), [0, 1, 3, 4, 5])  # 2.5 rounds up
    for n, n0 in [(10, 10), (100, 7), (256, 60)]:
        k = knot_positions(n, n0)
        assert k[0] == 0 and k[-1] == n - 1 and np.all(np.diff(k) > 0)


def test_spline_identity_when_full():
    assert np.array_equal(build_spline_kernel(8, 8).K, np.eye(8))


@pytest.mark.parametrize("n, n0", [(10, 2), (10, 3), (50, 7), (256, 60), (61, 60)])
def test_spline_kernel_properties(n, n0):
    s = build_spline_kernel(n, n0)
    assert s.K.shape == (n, n0)
    np.testing.assert_allclose(s.K @ np.ones(n0), np.ones(n), atol=1e-10)
    assert np.array_equal(s.K[s.knots], np.eye(n0))
    # reproduces functions linear in frequency index
    np.testing.assert_allclose(s.K @ s.knots.astype(float), np.arange(n), atol=1e-10)


def test_spline_linear_in_knot_index_for_even_spacing():
    s = build_spline_kernel(49, 7)   # knots every 8 indices
    np.testing.assert_allclose(s.K @ np.arange(7.0), np.arange(49) / 8, atol=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_spline_matches_scipy_natural_spline(seed):
    rng = np.random.default_rng(seed)
    n, n0 = 40, 9
    s = build_spline_kernel(n, n0)
    y = rng.standard_normal(n0)
    ref = CubicSpline(s.knots, y, bc_type="natural")(np.arange(n))
    np.testing.assert_allclose(interpolate_weights(s, y), ref, atol=1e-12)


@pytest.mark.parametrize("n, n0", [(5, 1), (5, 6)])
def test_spline_domain(n, n0):
    with pytest.raises(DomainError):
        build_spline_kernel(n, n0)


def test_interpolate_weights():
    s = build_spline_kernel(20, 5)
    np.testing.assert_allclose(interpolate_weights(s, np.ones(5)), np.ones(20), atol=1e-12)
    for j in range(5):
        e = np.zeros(5)
        e[j] = 1
        np.testing.assert_array_equal(interpolate_weights(s, e), s.K[:, j])
    w = np.random.default_rng(0).standard_normal(5)
    np.testing.assert_array_equal(interpolate_weights(s, w)[s.knots], w)
    full = build_spline_kernel(8, 8)
    np.testing.assert_array_equal(full.interpolate(w[:3].repeat(3)[:8]), w[:3].repeat(3)[:8])
    with pytest.raises(ShapeError):
        interpolate_weights(s, np.ones(4))


def test_basis_is_immutable_value():
    b = SpectralBasis(np.zeros(2), np.eye(2))
    with pytest.raises(Exception):
        b.U = np.zeros((2, 2))
