"""
Spectral filters on a cycle
===========================

On a ring of N nodes the Laplacian eigenvectors are sines and cosines, so a
spectral multiplier is an ordinary circular convolution. This script builds a
symmetric filter, reads off its spectral multipliers and checks that a graph
convolution layer reproduces it.
"""
import numpy as np

from specnet import build_spline_kernel, graph_basis
from specnet.nn import GraphConv

n = 16
W = np.zeros((n, n))
for i in range(n):
    W[i, (i + 1) % n] = W[(i + 1) % n, i] = 1.0

basis = graph_basis(W)
print("eigenvalues:", np.round(basis.eigenvalues, 3))

# a symmetric smoothing filter h[k] = h[-k]
h = np.zeros(n)
h[[0, 1, -1, 2, -2]] = [0.4, 0.2, 0.2, 0.1, 0.1]
C = np.array([[h[(i - j) % n] for j in range(n)] for i in range(n)])

# the circulant is diagonal in the eigenbasis
U = basis.U
w = np.diag(U @ C @ U.T)
print("off-diagonal mass:", np.linalg.norm(U @ C @ U.T - np.diag(w)))

layer = GraphConv(basis, build_spline_kernel(n, n), 1, 1, bias=False)
layer.params["w"] = w[None, None, :]

x = np.random.default_rng(0).standard_normal(n)
y = layer.forward(x[None, None, :])[0, 0]
print("max |graph conv - circular conv|:", np.max(np.abs(y - C @ x)))

# with fewer knots the multipliers are a natural spline in frequency,
# which keeps the filter spatially localized
spline = build_spline_kernel(n, 5)
smooth = spline.interpolate(np.array([1.0, 0.6, 0.3, 0.1, 0.0]))
print("spline multipliers:", np.round(smooth, 3))
