"""Spectral convolutional networks on graphs estimated from data."""
from .clustering import (ClusterHierarchy, Partition, PoolingMap, build_hierarchy, build_pooling_map,
                         coarsen_graph, spectral_cluster)
from .data import (FeatureMatrix, LabeledDataset, SplitSpec, load_matrix, log_normalize, split,
                   zscore_normalize)
from .graph import (DistanceMatrix, SimilarityGraph, count_graph_parameters, gaussian_kernel,
                    low_rank_project, pairwise_sq_distances, self_tuning_kernel, supervised_distance)
from .spectral import (SpectralBasis, SplineKernel, build_spline_kernel, eigendecompose, gft, igft,
                       graph_basis, interpolate_weights, normalized_laplacian)
from .synthetic import make_graph_signals
from .train import (AdaGradState, GraphArtifacts, TrainConfig, adagrad_step, build_network,
                    count_net_parameters, evaluate, fit, parse_architecture, train_fc_proxy)

__version__ = "0.1.0"
