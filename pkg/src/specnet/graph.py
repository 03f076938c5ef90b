"""Similarity-graph estimation between features.

Distances are taken between columns of the data matrix (features), or between
rows of a trained first-layer weight matrix for the supervised variant. They
are turned into weights with a Gaussian kernel, using either one global
bandwidth or per-node self-tuning bandwidths.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateScaleError, DomainError, IsolatedNodeError, ShapeError, ValidationError

METHODS = ("rbf", "rbf-local", "supervised", "supervised-lowrank", "known")


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.values, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ShapeError(f"distance matrix must be square, got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValidationError("distances must be finite and non-negative")
        if not np.array_equal(d, d.T):
            raise ValidationError("distance matrix is not exactly symmetric")
        if np.any(np.diag(d) != 0):
            raise ValidationError("distance matrix must have a zero diagonal")
        object.__setattr__(self, "values", d)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SimilarityGraph:
    """Dense symmetric weight matrix plus a record of how it was built.

    ``unit_diagonal=False`` relaxes the rules for coarsened graphs, whose
    weights are block sums: the diagonal holds accumulated self-weight and
    entries may exceed 1.
    """

    weights: np.ndarray
    info: dict = field(default_factory=dict)
    unit_diagonal: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        validate_weights(w, unit_diagonal=self.unit_diagonal)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)


def validate_weights(w: np.ndarray, unit_diagonal: bool = True, atol: float = 0.0) -> None:
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
        raise ShapeError(f"weight matrix must be square and non-empty, got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weight matrix has non-finite entries")
    if not np.allclose(w, w.T, rtol=0.0, atol=atol):
        i, j = np.unravel_index(np.argmax(np.abs(w - w.T)), w.shape)
        raise ValidationError(f"weight matrix is not symmetric: W[{i},{j}] != W[{j},{i}]")
    if np.any(w < 0):
        raise ValidationError("weight matrix has negative entries")
    if unit_diagonal:
        if np.any(w > 1):
            raise ValidationError("weights must lie in [0, 1]")
        if np.any(np.diag(w) != 1):
            raise ValidationError("similarity graphs must have a unit diagonal")
    deg = w.sum(axis=1)
    if np.any(deg <= 0):
        raise IsolatedNodeError(f"node {int(np.argmin(deg))} has zero degree")


def known_graph(weights, info=None) -> SimilarityGraph:
    """Wrap a user-provided graph. Only symmetry, non-negativity and degrees are checked."""
    return SimilarityGraph(weights, dict(info or {}, method="known"), unit_diagonal=False)


def pairwise_sq_distances(X) -> DistanceMatrix:
    """Squared Euclidean distances between the columns of ``X``."""
    values = getattr(X, "values", X)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError("expected a 2-d data matrix")
    return _row_sq_distances(values.T)


def supervised_distance(W1) -> DistanceMatrix:
    """Squared Euclidean distances between the rows of a first-layer weight matrix."""
    W1 = np.asarray(W1, dtype=np.float64)
    if W1.ndim != 2:
        raise ShapeError("expected a 2-d weight matrix")
    return _row_sq_distances(W1)


def _row_sq_distances(rows: np.ndarray) -> DistanceMatrix:
    if rows.shape[0] == 1:
        return DistanceMatrix(np.zeros((1, 1)))
    # pdist visits each pair once, so mirroring gives exact symmetry
    return DistanceMatrix(squareform(pdist(rows, "sqeuclidean")))


def median_sigma(D: DistanceMatrix) -> float:
    """Bandwidth with sigma**2 equal to the median off-diagonal squared distance."""
    off = D.values[~np.eye(D.n, dtype=bool)]
    if off.size == 0:
        return 1.0
    med = float(np.median(off))
    if med <= 0:
        pos = off[off > 0]
        med = float(pos.mean()) if pos.size else 1.0
    return float(np.sqrt(med))


def gaussian_kernel(D: DistanceMatrix, sigma: float | None = None) -> SimilarityGraph:
    """``exp(-d / sigma**2)``; ``sigma=None`` uses :func:`median_sigma`."""
    if sigma is None:
        sigma = median_sigma(D)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    w = np.exp(-D.values / sigma**2)
    return SimilarityGraph(w, {"method": "rbf", "sigma": float(sigma)})


def knn_scales(D: DistanceMatrix, k: int) -> np.ndarray:
    """Distance from each node to its k-th nearest other node."""
    n = D.n
    if not 1 <= k <= n - 1:
        raise DomainError(f"knn k must lie in [1, {n - 1}], got {k}")
    d = D.values.copy()
    np.fill_diagonal(d, np.inf)
    # self sits at +inf, so the k-th smallest of the row skips it
    return np.partition(d, k - 1, axis=1)[:, k - 1]


def self_tuning_kernel(D: DistanceMatrix, k: int) -> SimilarityGraph:
    """``exp(-d(i,j) / (sigma_i sigma_j))`` with ``sigma_i`` the k-th neighbour distance.

    ``sigma_i`` is the squared distance ``d(i, i_k)`` itself, not its root.
    """
    sig = knn_scales(D, k)
    zero = np.flatnonzero(sig <= 0)
    if zero.size:
        raise DegenerateScaleError(
            f"feature {int(zero[0])} has a zero distance to its {k}-th nearest neighbour "
            "(duplicated features); increase k or deduplicate"
        )
    w = np.exp(-D.values / np.outer(sig, sig))
    np.fill_diagonal(w, 1.0)
    return SimilarityGraph(w, {"method": "rbf-local", "knn_k": int(k), "sigmas": sig.tolist()})


def low_rank_approx(W, m: int) -> np.ndarray:
    """Raw projection of a symmetric matrix onto its ``m`` leading eigen-directions."""
    w = np.asarray(getattr(W, "weights", W), dtype=np.float64)
    n = w.shape[0]
    if not 1 <= m <= n:
        raise DomainError(f"rank m must lie in [1, {n}], got {m}")
    evals, evecs = np.linalg.eigh((w + w.T) / 2)
    top = evecs[:, n - m:]
    approx = (top * evals[n - m:]) @ top.T
    return (approx + approx.T) / 2


def low_rank_project(W: SimilarityGraph, m: int) -> SimilarityGraph:
    """Rank-``m`` projection, repaired back into a valid similarity graph.

    Negative entries are clamped to 0, entries above 1 to 1, and the diagonal
    is reset to 1.
    """
    approx = np.clip(low_rank_approx(W, m), 0.0, 1.0)
    np.fill_diagonal(approx, 1.0)
    info = dict(W.info)
    info.update(method=_lowrank_name(info.get("method")), m=int(m))
    return SimilarityGraph(approx, info)


def _lowrank_name(method):
    if method == "supervised":
        return "supervised-lowrank"
    return f"{method}-lowrank" if method else "lowrank"


def count_graph_parameters(method: str, n: int, m: int | None = None) -> int:
    """Parameters consumed by graph estimation: N^2/2 full, m*N low rank, 0 known."""
    if method not in METHODS:
        raise DomainError(f"unknown graph method {method!r}; valid: {', '.join(METHODS)}")
    if method == "known":
        return 0
    if method == "supervised-lowrank":
        if m is None:
            raise DomainError("low-rank parameter count needs m")
        return int(m) * int(n)
    return int(n) * int(n) // 2
