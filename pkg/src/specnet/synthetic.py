"""Synthetic graph-signal classification problems.

Nodes are random points in the unit square joined by a Gaussian kernel.
Each class has a mean signal built from the graph's low-frequency
eigenvectors; samples add low-frequency variation and white noise, so class
information lives in spatially smooth patterns on the graph.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, LabeledDataset
from .graph import SimilarityGraph
from .spectral import SpectralBasis, graph_basis


@dataclass
class GraphSignalProblem:
    dataset: LabeledDataset
    graph: SimilarityGraph
    basis: SpectralBasis
    points: np.ndarray
    class_means: np.ndarray


def random_geometric_graph(n: int, rng, bandwidth: float = 0.1):
    points = rng.random((n, 2))
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2)
    w = np.exp(-d2 / bandwidth**2)
    w = (w + w.T) / 2
    np.fill_diagonal(w, 1.0)
    return SimilarityGraph(w, {"method": "known", "generator": "geometric", "bandwidth": bandwidth}), points


def make_graph_signals(n_nodes: int = 256, n_samples: int = 2000, n_classes: int = 4,
                       n_low: int = 24, class_scale: float = 0.35, low_noise: float = 1.0,
                       white_noise: float = 1.0, bandwidth: float = 0.1, seed: int = 0) -> GraphSignalProblem:
    rng = np.random.default_rng(seed)
    graph, points = random_geometric_graph(n_nodes, rng, bandwidth)
    basis = graph_basis(graph)
    low = basis.U[1: n_low + 1]                     # skip the constant-like eigenvector
    coef = rng.standard_normal((n_classes, n_low)) * class_scale
    means = coef @ low * np.sqrt(n_nodes)
    labels = rng.integers(1, n_classes + 1, size=n_samples)
    smooth = rng.standard_normal((n_samples, n_low)) * low_noise @ low * np.sqrt(n_nodes)
    X = means[labels - 1] + smooth + white_noise * rng.standard_normal((n_samples, n_nodes))
    ds = LabeledDataset(FeatureMatrix(X), labels, "classification", n_classes)
    return GraphSignalProblem(ds, graph, basis, points, means)


def permute_graph(graph: SimilarityGraph, seed: int = 0) -> SimilarityGraph:
    """Relabel the nodes of ``graph`` at random, decoupling it from the data."""
    perm = np.random.default_rng(seed).permutation(graph.n)
    info = dict(graph.info, permuted_seed=int(seed))
    return SimilarityGraph(graph.weights[np.ix_(perm, perm)], info, graph.unit_diagonal)
