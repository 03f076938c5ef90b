"""Multi-resolution spectral clustering, graph coarsening and pooling maps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .graph import SimilarityGraph
from .spectral import eigendecompose, normalized_laplacian


@dataclass(frozen=True)
class Partition:
    assignment: np.ndarray
    n_clusters: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ShapeError("assignment must be 1-d")
        if a.size and (a.min() < 0 or a.max() >= self.n_clusters):
            raise DomainError("cluster ids must lie in [0, n_clusters)")
        if len(np.unique(a)) != self.n_clusters:
            raise DomainError("every cluster id must be used at least once")
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return len(self.assignment)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)

    def indicator(self) -> np.ndarray:
        P = np.zeros((self.n, self.n_clusters))
        P[np.arange(self.n), self.assignment] = 1.0
        return P


def identity_partition(n: int) -> Partition:
    return Partition(np.arange(n), n)


def canonical_labels(assignment: np.ndarray) -> np.ndarray:
    """Relabel clusters in order of their lowest member index."""
    _, first = np.unique(assignment, return_index=True)
    order = np.argsort(first)
    relabel = np.empty(len(order), dtype=np.int64)
    relabel[order] = np.arange(len(order))
    _, inverse = np.unique(assignment, return_inverse=True)
    return relabel[inverse]


def kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6) -> np.ndarray:
    """Lloyd's algorithm with farthest-point seeding.

    The first centre is drawn uniformly with ``seed``; each later centre is the
    point farthest from those already chosen. Empty clusters are refilled by
    splitting the largest cluster at its point farthest from the centroid.
    """
    n = len(points)
    rng = np.random.default_rng(seed)
    centers = [int(rng.integers(n))]
    dist = np.sum((points - points[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist))
        centers.append(nxt)
        dist = np.minimum(dist, np.sum((points - points[nxt]) ** 2, axis=1))
    C = points[centers].copy()

    sq_norms = np.sum(points**2, axis=1)
    labels = np.zeros(n, dtype=np.int64)
    prev = np.inf
    for _ in range(max_iter):
        d2 = sq_norms[:, None] - 2.0 * points @ C.T + np.sum(C**2, axis=1)[None, :]
        labels = np.argmin(d2, axis=1)
        labels = _repair_empty(points, labels, k)
        for c in range(k):
            C[c] = points[labels == c].mean(axis=0)
        inertia = float(np.sum((points - C[labels]) ** 2))
        if np.isfinite(prev) and prev - inertia <= tol * prev:
            break
        prev = inertia
    return labels


def _repair_empty(points, labels, k):
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        centroid = points[members].mean(axis=0)
        far = members[int(np.argmax(np.sum((points[members] - centroid) ** 2, axis=1)))]
        labels[far] = c
        counts[big] -= 1
        counts[c] = 1
    return labels


def spectral_embedding(W, m: int) -> np.ndarray:
    """Rows of the first ``m`` Laplacian eigenvectors, normalized to unit length."""
    basis = eigendecompose(normalized_laplacian(W))
    emb = basis.U[:m].T.copy()
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return emb / np.where(norms > 0, norms, 1.0)


def spectral_cluster(W, m: int, seed: int = 0) -> Partition:
    w = np.asarray(getattr(W, "weights", W))
    n = len(w)
    if not 1 <= m <= n:
        raise DomainError(f"number of clusters must lie in [1, {n}], got {m}")
    if m == 1:
        return Partition(np.zeros(n, dtype=np.int64), 1)
    labels = kmeans(spectral_embedding(w, m), m, seed)
    return Partition(canonical_labels(labels), m)


def coarsen_graph(W, partition: Partition) -> SimilarityGraph:
    """Sum weights within and between clusters; self-weight stays on the diagonal."""
    w = np.asarray(getattr(W, "weights", W), dtype=np.float64)
    if len(w) != partition.n:
        raise ShapeError(f"partition covers {partition.n} nodes, graph has {len(w)}")
    P = partition.indicator()
    coarse = P.T @ w @ P
    coarse = (coarse + coarse.T) / 2
    info = {"method": "coarsened", "from_nodes": int(len(w))}
    return SimilarityGraph(coarse, info, unit_diagonal=False)


@dataclass(frozen=True)
class ClusterHierarchy:
    """Graphs from fine to coarse.

    ``levels[0]`` is the input graph with the identity partition. For
    ``l >= 1``, ``levels[l]`` holds the partition of the level ``l-1`` nodes
    into clusters together with the coarsened graph on those clusters.
    """

    levels: list
    strides: tuple
    seed: int

    @property
    def sizes(self) -> list[int]:
        return [p.n_clusters for p, _ in self.levels]

    def graph(self, level: int) -> SimilarityGraph:
        return self.levels[level][1]

    def partition(self, level: int) -> Partition:
        return self.levels[level][0]

    def to_dict(self) -> dict:
        return {
            "strides": list(self.strides),
            "seed": int(self.seed),
            "sizes": self.sizes,
            "assignments": [p.assignment.tolist() for p, _ in self.levels],
        }


def build_hierarchy(W: SimilarityGraph, strides, seed: int = 0) -> ClusterHierarchy:
    strides = tuple(int(s) for s in strides)
    for s in strides:
        if s < 2:
            raise DomainError(f"pooling strides must be >= 2, got {s}")
    if math.prod(strides) > W.n:
        raise DomainError(f"product of strides {math.prod(strides)} exceeds N={W.n}")
    levels = [(identity_partition(W.n), W)]
    graph = W
    for level, stride in enumerate(strides, start=1):
        m = math.ceil(graph.n / stride)
        part = spectral_cluster(graph, m, seed + level)
        graph = coarsen_graph(graph, part)
        levels.append((part, graph))
    return ClusterHierarchy(levels, strides, int(seed))


def hierarchy_from_assignments(W: SimilarityGraph, strides, seed, assignments) -> ClusterHierarchy:
    """Rebuild a hierarchy from stored assignments (coarse graphs are recomputed)."""
    levels = [(identity_partition(W.n), W)]
    graph = W
    for a in assignments[1:]:
        a = np.asarray(a, dtype=np.int64)
        part = Partition(a, int(a.max()) + 1)
        graph = coarsen_graph(graph, part)
        levels.append((part, graph))
    return ClusterHierarchy(levels, tuple(strides), int(seed))


@dataclass(frozen=True)
class PoolingMap:
    """Receptive field (sorted input node indices) for each output node."""

    fields: list
    n_in: int
    mode: str = "max"
    stride: int = 1

    def __post_init__(self):
        if self.mode not in ("max", "average"):
            raise DomainError(f"pooling mode must be 'max' or 'average', got {self.mode!r}")
        fields = [np.unique(np.asarray(f, dtype=np.int64)) for f in self.fields]
        if any(len(f) == 0 for f in fields):
            raise DomainError("receptive fields must be non-empty")
        covered = np.zeros(self.n_in, dtype=bool)
        for f in fields:
            covered[f] = True
        if not covered.all():
            raise DomainError(f"input node {int(np.argmin(covered))} is not covered by any field")
        object.__setattr__(self, "fields", fields)

    @property
    def n_out(self) -> int:
        return len(self.fields)

    @property
    def pool_size(self) -> int:
        return 2 * self.stride

    def padded_index(self) -> np.ndarray:
        """Fields padded to equal width by repeating their first member."""
        width = max(len(f) for f in self.fields)
        idx = np.empty((self.n_out, width), dtype=np.int64)
        for o, f in enumerate(self.fields):
            idx[o, : len(f)] = f
            idx[o, len(f):] = f[0]
        return idx

    def average_matrix(self) -> np.ndarray:
        P = np.zeros((self.n_out, self.n_in))
        for o, f in enumerate(self.fields):
            P[o, f] = 1.0 / len(f)
        return P


def nearest_clusters(coarse_weights: np.ndarray) -> np.ndarray:
    """For each cluster, the other cluster with the largest weight (lowest id on ties)."""
    w = np.array(coarse_weights, dtype=np.float64)
    np.fill_diagonal(w, -np.inf)
    return np.argmax(w, axis=1)


def build_pooling_map(h: ClusterHierarchy, level: int, mode: str = "max") -> PoolingMap:
    """Pooling from level ``level-1`` nodes onto level ``level`` clusters.

    Each field is the cluster's own members plus those of its most strongly
    connected neighbouring cluster, doubling the pool size relative to the stride.
    """
    if not 1 <= level < len(h.levels):
        raise DomainError(f"pooling level must lie in [1, {len(h.levels) - 1}], got {level}")
    part, coarse = h.levels[level]
    stride = h.strides[level - 1]
    if part.n_clusters == 1:
        return PoolingMap([np.arange(part.n)], part.n, mode, stride)
    nbr = nearest_clusters(coarse.weights)
    members = [part.members(c) for c in range(part.n_clusters)]
    fields = [np.concatenate([members[o], members[nbr[o]]]) for o in range(part.n_clusters)]
    return PoolingMap(fields, part.n, mode, stride)
