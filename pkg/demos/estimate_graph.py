"""
Estimating a graph from data
============================

Features drawn from a hidden geometric graph are correlated with their
neighbours. We compare three ways of recovering that graph: a global Gaussian
kernel, a self-tuning kernel with local scales, and the supervised kernel
built from the first layer of a fully connected network.
"""
import numpy as np

from specnet import (gaussian_kernel, make_graph_signals, pairwise_sq_distances, self_tuning_kernel,
                     supervised_distance, train_fc_proxy, zscore_normalize)
from specnet.data import LabeledDataset

problem = make_graph_signals(n_nodes=64, n_samples=600, n_classes=4, seed=1)
X, _, _ = zscore_normalize(problem.dataset.features)
truth = problem.graph.weights


def agreement(W):
    # correlation between estimated and true off-diagonal weights
    iu = np.triu_indices(len(W), 1)
    return np.corrcoef(W[iu], truth[iu])[0, 1]


D = pairwise_sq_distances(X)
print("global kernel      ", round(agreement(gaussian_kernel(D).weights), 3))
print("self-tuning (k=7)  ", round(agreement(self_tuning_kernel(D, 7).weights), 3))

ds = LabeledDataset(X, problem.dataset.targets, "classification", 4)
proxy = train_fc_proxy(ds, hidden=(128,), epochs=30, learning_rate=0.05, seed=0)
print("supervised         ", round(agreement(gaussian_kernel(supervised_distance(proxy.W1)).weights), 3))
