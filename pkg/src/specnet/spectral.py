"""Normalized Laplacian, its eigenbasis (graph Fourier transform) and the
spline kernel that expands a few spectral weights into a full multiplier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IsolatedNodeError, NumericalError, ShapeError


def normalized_laplacian(W) -> np.ndarray:
    """``I - D^{-1/2} W D^{-1/2}`` for a weight matrix or :class:`SimilarityGraph`."""
    w = np.asarray(getattr(W, "weights", W), dtype=np.float64)
    deg = w.sum(axis=1)
    if np.any(deg <= 0):
        raise IsolatedNodeError(f"node {int(np.flatnonzero(deg <= 0)[0])} is isolated (degree 0)")
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(len(w)) - inv_sqrt[:, None] * w * inv_sqrt[None, :]
    return (lap + lap.T) / 2


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive (first such entry on ties)."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(len(vectors)), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of a Laplacian. Rows of ``U`` are eigenvectors, so ``U @ x`` is the GFT."""

    eigenvalues: np.ndarray
    U: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def gft(self, x):
        return gft(self, x)

    def igft(self, xhat):
        return igft(self, xhat)


def eigendecompose(L) -> SpectralBasis:
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ShapeError(f"expected a square matrix, got {L.shape}")
    sym = (L + L.T) / 2
    try:
        evals, evecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed on {L.shape} matrix: {exc}") from exc
    if not np.all(np.isfinite(evals)):
        raise NumericalError("eigensolver returned non-finite eigenvalues")
    return SpectralBasis(evals, fix_signs(np.ascontiguousarray(evecs.T)))


def graph_basis(W) -> SpectralBasis:
    return eigendecompose(normalized_laplacian(W))


def _check_len(basis: SpectralBasis, x: np.ndarray):
    if x.shape[-1] != basis.n:
        raise ShapeError(f"signal has {x.shape[-1]} nodes, basis has {basis.n}")


def gft(basis: SpectralBasis, x) -> np.ndarray:
    """Forward transform along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(basis, x)
    return x @ basis.U.T


def igft(basis: SpectralBasis, xhat) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=np.float64)
    _check_len(basis, xhat)
    return xhat @ basis.U


def knot_positions(n: int, n0: int) -> np.ndarray:
    # round half up, independent of numpy's banker's rounding
    return np.floor(np.arange(n0) * (n - 1) / (n0 - 1) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class SplineKernel:
    """N x N0 natural cubic spline interpolation operator over frequency index."""

    K: np.ndarray
    knots: np.ndarray

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def n0(self) -> int:
        return self.K.shape[1]

    def interpolate(self, w_sub):
        return interpolate_weights(self, w_sub)


def natural_spline_matrix(knots: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Matrix mapping values at ``knots`` to the natural cubic spline evaluated at ``points``.

    The second derivatives at the knots are a linear function of the values
    (tridiagonal system with zero end conditions); the spline on each interval
    is then linear in values and second derivatives.
    """
    x = np.asarray(knots, dtype=np.float64)
    t = np.asarray(points, dtype=np.float64)
    m = len(x)
    h = np.diff(x)
    # second derivatives: curv = S @ y, zero at both ends
    S = np.zeros((m, m))
    if m > 2:
        A = np.zeros((m - 2, m - 2))
        B = np.zeros((m - 2, m))
        for r in range(m - 2):
            i = r + 1
            A[r, r] = 2.0 * (h[i - 1] + h[i])
            if r > 0:
                A[r, r - 1] = h[i - 1]
            if r < m - 3:
                A[r, r + 1] = h[i]
            B[r, i - 1] = 6.0 / h[i - 1]
            B[r, i] = -6.0 / h[i - 1] - 6.0 / h[i]
            B[r, i + 1] = 6.0 / h[i]
        S[1:-1] = np.linalg.solve(A, B)

    seg = np.clip(np.searchsorted(x, t, side="right") - 1, 0, m - 2)
    hs = h[seg]
    s = (t - x[seg]) / hs
    a, b = 1.0 - s, s
    rows = np.arange(len(t))
    out = np.zeros((len(t), m))
    out[rows, seg] += a
    out[rows, seg + 1] += b
    ca = hs**2 / 6.0 * (a**3 - a)
    cb = hs**2 / 6.0 * (b**3 - b)
    out += ca[:, None] * S[seg] + cb[:, None] * S[seg + 1]
    return out


def build_spline_kernel(n: int, n0: int) -> SplineKernel:
    if not 2 <= n0 <= n:
        raise DomainError(f"need 2 <= N0 <= N, got N0={n0}, N={n}")
    knots = knot_positions(n, n0)
    if n0 == n:
        return SplineKernel(np.eye(n), knots)
    K = natural_spline_matrix(knots, np.arange(n))
    K[knots] = np.eye(n0)
    return SplineKernel(K, knots)


def interpolate_weights(kernel: SplineKernel, w_sub) -> np.ndarray:
    """Expand subsampled weights along the last axis: ``w = K @ w_sub``."""
    w_sub = np.asarray(w_sub, dtype=np.float64)
    if w_sub.shape[-1] != kernel.n0:
        raise ShapeError(f"expected {kernel.n0} subsampled weights, got {w_sub.shape[-1]}")
    return w_sub @ kernel.K.T
