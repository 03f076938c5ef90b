"""Central finite-difference checks for every layer's backward pass."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .clustering import build_hierarchy, build_pooling_map
from .graph import SimilarityGraph
from .spectral import build_spline_kernel, graph_basis
from .train import GraphArtifacts, build_network

STEP = 1e-5
TOLERANCE = 1e-6


@dataclass
class CheckResult:
    name: str
    rel_error: float
    passed: bool


def rel_error(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)


def numeric_grad(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Gradient of scalar ``f()`` w.r.t. ``x``, perturbing ``x`` in place."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return g


def random_graph(n: int, rng) -> SimilarityGraph:
    w = rng.uniform(0.05, 1.0, size=(n, n))
    w = (w + w.T) / 2
    np.fill_diagonal(w, 1.0)
    return SimilarityGraph(w)


def _check(name, analytic, numeric, corrupt):
    if corrupt is not None and corrupt == name.split(".")[0]:
        analytic = analytic * 1.01 + 1e-3
    err = rel_error(analytic, numeric)
    return CheckResult(name, err, err < TOLERANCE)


def check_graph_conv(rng, n=16, f_in=2, f_out=3, n0=5, samples=4, corrupt=None):
    basis = graph_basis(random_graph(n, rng))
    layer = nn.GraphConv(basis, build_spline_kernel(n, n0), f_in, f_out, rng)
    layer.params["b"] = rng.standard_normal(f_out)
    x = rng.standard_normal((samples, f_in, n))
    R = rng.standard_normal((samples, f_out, n))

    def loss():
        return float(np.sum(nn.graph_conv_forward(layer, x) * R))

    g = nn.graph_conv_backward(layer, x, R)
    return [
        _check("graph_conv.input", g.grad_input, numeric_grad(loss, x), corrupt),
        _check("graph_conv.weights", g.grad_weights, numeric_grad(loss, layer.params["w"]), corrupt),
        _check("graph_conv.bias", g.grad_bias, numeric_grad(loss, layer.params["b"]), corrupt),
    ]


def check_pooling(rng, n=16, maps=2, samples=4, corrupt=None):
    graph = random_graph(n, rng)
    h = build_hierarchy(graph, [4], seed=int(rng.integers(1 << 30)))
    out = []
    for mode in ("average", "max"):
        pmap = build_pooling_map(h, 1, mode)
        x = rng.standard_normal((samples, maps, n))
        R = rng.standard_normal((samples, maps, pmap.n_out))

        def loss():
            return float(np.sum(nn.graph_pool_forward(pmap, x)[0] * R))

        _, record = nn.graph_pool_forward(pmap, x)
        analytic = nn.graph_pool_backward(pmap, R, record)
        out.append(_check(f"pool_{mode}.input", analytic, numeric_grad(loss, x), corrupt))
    return out


def check_dense(rng, n_in=7, n_out=5, samples=4, corrupt=None):
    W = rng.standard_normal((n_in, n_out))
    b = rng.standard_normal(n_out)
    x = rng.standard_normal((samples, n_in))
    R = rng.standard_normal((samples, n_out))

    def loss():
        return float(np.sum(nn.fully_connected(W, b, x) * R))

    g = nn.fully_connected_backward(W, x, R)
    return [
        _check("dense.input", g.grad_input, numeric_grad(loss, x), corrupt),
        _check("dense.weights", g.grad_weights, numeric_grad(loss, W), corrupt),
        _check("dense.bias", g.grad_bias, numeric_grad(loss, b), corrupt),
    ]


def check_relu(rng, size=20, corrupt=None):
    x = rng.standard_normal(size)
    x[np.abs(x) < 1e-3] += 0.01   # stay away from the kink
    R = rng.standard_normal(size)

    def loss():
        return float(np.sum(nn.relu(x) * R))

    return [_check("relu.input", nn.relu_backward(x, R), numeric_grad(loss, x), corrupt)]


def check_losses(rng, samples=4, classes=5, corrupt=None):
    logits = rng.standard_normal((samples, classes))
    labels = rng.integers(1, classes + 1, size=samples)
    pred = rng.standard_normal(samples)
    target = rng.standard_normal(samples)
    _, g_ce = nn.softmax_cross_entropy(logits, labels)
    _, g_rmse = nn.rmse_loss(pred, target)
    return [
        _check("cross_entropy.logits", g_ce,
               numeric_grad(lambda: nn.softmax_cross_entropy(logits, labels)[0], logits), corrupt),
        _check("rmse.pred", g_rmse, numeric_grad(lambda: nn.rmse_loss(pred, target)[0], pred), corrupt),
    ]


def check_network(rng, n=16, samples=4, classes=3, n0=5, corrupt=None):
    """End-to-end GC-P-GC-P-FC network under cross-entropy, every parameter and the input."""
    graph = random_graph(n, rng)
    artifacts = GraphArtifacts(build_hierarchy(graph, [2, 2], seed=int(rng.integers(1 << 30))))
    out = []
    for mode in ("average", "max"):
        net = build_network("GC3-P2-GC2-P2-FC6", n, classes, artifacts, n0=n0, pooling=mode,
                            seed=int(rng.integers(1 << 30)))
        for layer in net.layers:
            if "b" in layer.params:
                layer.params["b"] = rng.standard_normal(layer.params["b"].shape) * 0.1
        x = rng.standard_normal((samples, n))
        labels = rng.integers(1, classes + 1, size=samples)

        def loss():
            return nn.softmax_cross_entropy(net.forward(x), labels)[0]

        _, g = nn.softmax_cross_entropy(net.forward(x), labels)
        grad_x = net.backward(g)
        analytic = dict(net.gradients())
        out.append(_check(f"network_{mode}.input", grad_x, numeric_grad(loss, x), corrupt))
        for key, p in net.parameters():
            out.append(_check(f"network_{mode}.{key}", analytic[key], numeric_grad(loss, p), corrupt))
    return out


def run_gradcheck(seed: int = 0, n: int = 16, f_in: int = 2, f_out: int = 3, n0: int = 5,
                  samples: int = 4, corrupt: str | None = None) -> list[CheckResult]:
    """Run every check. ``corrupt`` names a check group (e.g. ``"graph_conv"``)
    whose analytic gradient is deliberately perturbed, to test the harness."""
    rng = np.random.default_rng(seed)
    results = []
    results += check_graph_conv(rng, n, f_in, f_out, n0, samples, corrupt)
    results += check_pooling(rng, n, f_in, samples, corrupt)
    results += check_dense(rng, corrupt=corrupt)
    results += check_relu(rng, corrupt=corrupt)
    results += check_losses(rng, samples, corrupt=corrupt)
    results += check_network(rng, n, samples, n0=min(n0, n), corrupt=corrupt)
    return results
