"""Layers with hand-written backward passes, losses and metrics.

Batches are arrays of shape ``(samples, maps, nodes)`` inside the graph part
of a network and ``(samples, units)`` after flattening.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import PoolingMap
from .errors import DomainError, ShapeError, StateError, ValidationError
from .spectral import SpectralBasis, SplineKernel


@dataclass
class LayerGradients:
    grad_input: np.ndarray
    grad_weights: np.ndarray | None = None
    grad_bias: np.ndarray | None = None


class Layer:
    """Base layer. ``params`` and ``grads`` map parameter names to arrays."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())


# -- graph convolution ----------------------------------------------------

class GraphConv(Layer):
    """Spectral convolution ``y_f' = U^T (sum_f (U x_f) * (K w_f'f)) + b_f'``.

    ``w`` holds the subsampled weights, shape ``(f_out, f_in, N0)``.
    """

    def __init__(self, basis: SpectralBasis, kernel: SplineKernel, f_in: int, f_out: int,
                 rng=None, bias: bool = True):
        super().__init__()
        if kernel.n != basis.n:
            raise ShapeError(f"spline kernel has {kernel.n} rows, basis has {basis.n} nodes")
        self.basis = basis
        self.kernel = kernel
        self.f_in, self.f_out = f_in, f_out
        rng = np.random.default_rng(0) if rng is None else rng
        a = 1.0 / np.sqrt(f_in * kernel.n0)
        self.params["w"] = rng.uniform(-a, a, size=(f_out, f_in, kernel.n0))
        if bias:
            self.params["b"] = np.zeros(f_out)
        self._x = None

    @property
    def n_nodes(self) -> int:
        return self.basis.n

    def multipliers(self) -> np.ndarray:
        return self.params["w"] @ self.kernel.K.T

    def forward(self, x, training=False, rng=None):
        self._x = x
        return graph_conv_forward(self, x)

    def backward(self, grad_out):
        if self._x is None:
            raise StateError("GraphConv.backward called before forward")
        g = graph_conv_backward(self, self._x, grad_out)
        self.grads["w"] = g.grad_weights
        if "b" in self.params:
            self.grads["b"] = g.grad_bias
        return g.grad_input


def _check_graph_batch(layer: GraphConv, x: np.ndarray, maps: int, what: str):
    if x.ndim != 3 or x.shape[1] != maps or x.shape[2] != layer.n_nodes:
        raise ShapeError(
            f"{what} must have shape (S, {maps}, {layer.n_nodes}), got {x.shape}"
        )


def graph_conv_forward(layer: GraphConv, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_graph_batch(layer, x, layer.f_in, "input")
    U = layer.basis.U
    xh = _along_nodes(x, U.T)
    y = _along_nodes(_mix_maps(xh, layer.multipliers()), U)
    if "b" in layer.params:
        y += layer.params["b"][None, :, None]
    return y


def _along_nodes(x, M):
    """``x @ M`` on the last axis as a single 2-d product."""
    return (x.reshape(-1, x.shape[-1]) @ M).reshape(x.shape[:-1] + (M.shape[1],))


def _mix_maps(xh, mult):
    """``out[s, g, n] = sum_f xh[s, f, n] * mult[g, f, n]`` as one matmul per frequency."""
    out = xh.transpose(2, 0, 1) @ mult.transpose(2, 1, 0)   # (n, s, g)
    return out.transpose(1, 2, 0)


def graph_conv_backward(layer: GraphConv, x, grad_y) -> LayerGradients:
    """Exact adjoint of :func:`graph_conv_forward`.

    Products are formed in the spectral domain: both the incoming gradient and
    the input are transformed by ``U`` before being multiplied.
    """
    x = np.asarray(x, dtype=np.float64)
    grad_y = np.asarray(grad_y, dtype=np.float64)
    _check_graph_batch(layer, x, layer.f_in, "input")
    _check_graph_batch(layer, grad_y, layer.f_out, "output gradient")
    if grad_y.shape[0] != x.shape[0]:
        raise ShapeError("input and output gradient disagree on batch size")
    U = layer.basis.U
    xh = _along_nodes(x, U.T)
    gh = _along_nodes(grad_y, U.T)
    # (n, g, s) @ (n, s, f) -> (n, g, f)
    grad_mult = (gh.transpose(2, 1, 0) @ xh.transpose(2, 0, 1)).transpose(1, 2, 0)
    grad_w = grad_mult @ layer.kernel.K
    grad_x = _along_nodes(_mix_maps(gh, layer.multipliers().transpose(1, 0, 2)), U)
    grad_b = grad_y.sum(axis=(0, 2)) if "b" in layer.params else None
    return LayerGradients(grad_x, grad_w, grad_b)


# -- pooling --------------------------------------------------------------

class GraphPool(Layer):
    def __init__(self, pmap: PoolingMap):
        super().__init__()
        self.pmap = pmap
        self._record = None
        self._shape = None

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        y, self._record = graph_pool_forward(self.pmap, x)
        return y

    def backward(self, grad_out):
        if self._shape is None:
            raise StateError("GraphPool.backward called before forward")
        return graph_pool_backward(self.pmap, grad_out, self._record, self._shape)


def graph_pool_forward(pmap: PoolingMap, x):
    """Max or mean over each receptive field. Returns ``(y, argmax)``; argmax is
    ``None`` in average mode and holds input node indices in max mode."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != pmap.n_in:
        raise ShapeError(f"pooling expects {pmap.n_in} input nodes, got {x.shape[-1]}")
    if pmap.mode == "average":
        return x @ pmap.average_matrix().T, None
    idx = pmap.padded_index()
    y = x[..., idx[:, 0]]
    argmax = np.broadcast_to(idx[:, 0], y.shape).copy()
    # fields are sorted, so a strict ">" keeps the lowest index on ties
    for j in range(1, idx.shape[1]):
        v = x[..., idx[:, j]]
        better = v > y
        y = np.where(better, v, y)
        argmax = np.where(better, idx[:, j], argmax)
    return y, argmax


def graph_pool_backward(pmap: PoolingMap, grad_out, argmax=None, in_shape=None) -> np.ndarray:
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape[-1] != pmap.n_out:
        raise ShapeError(f"pooling gradient must have {pmap.n_out} nodes, got {grad_out.shape[-1]}")
    if pmap.mode == "average":
        return grad_out @ pmap.average_matrix()
    if argmax is None:
        raise StateError("max pooling backward needs the argmax record from forward")
    lead = grad_out.shape[:-1]
    grad_in = np.zeros(lead + (pmap.n_in,))
    flat_in = grad_in.reshape(-1, pmap.n_in)
    rows = np.repeat(np.arange(flat_in.shape[0]), pmap.n_out)
    np.add.at(flat_in, (rows, argmax.reshape(-1)), grad_out.reshape(-1))
    return grad_in


# -- dense part -----------------------------------------------------------

class Dense(Layer):
    """``y = x W + b`` with ``W`` stored as ``(n_in, n_out)``."""

    def __init__(self, n_in: int, n_out: int, rng=None):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        a = np.sqrt(6.0 / (n_in + n_out))
        self.params["W"] = rng.uniform(-a, a, size=(n_in, n_out))
        self.params["b"] = np.zeros(n_out)
        self._x = None

    def forward(self, x, training=False, rng=None):
        self._x = x
        return fully_connected(self.params["W"], self.params["b"], x)

    def backward(self, grad_out):
        if self._x is None:
            raise StateError("Dense.backward called before forward")
        g = fully_connected_backward(self.params["W"], self._x, grad_out)
        self.grads["W"], self.grads["b"] = g.grad_weights, g.grad_bias
        return g.grad_input


def fully_connected(W, b, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != W.shape[0]:
        raise ShapeError(f"dense layer expects (S, {W.shape[0]}) input, got {x.shape}")
    return x @ W + b


def fully_connected_backward(W, x, grad_y) -> LayerGradients:
    if grad_y.shape != (x.shape[0], W.shape[1]):
        raise ShapeError(f"dense gradient must have shape {(x.shape[0], W.shape[1])}, got {grad_y.shape}")
    return LayerGradients(grad_y @ W.T, x.T @ grad_y, grad_y.sum(axis=0))


class Flatten(Layer):
    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)


class ReLU(Layer):
    def forward(self, x, training=False, rng=None):
        self._mask = x > 0
        return relu(x)

    def backward(self, grad_out):
        return grad_out * self._mask


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_y):
    return grad_y * (np.asarray(x) > 0)


class Dropout(Layer):
    """Inverted dropout; the mask drawn in forward is reused by backward."""

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise DomainError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x, training=False, rng=None):
        y, self._mask = dropout(x, self.rate, rng, training)
        return y

    def backward(self, grad_out):
        return grad_out if self._mask is None else grad_out * self._mask


def dropout(x, rate: float, rng=None, training: bool = True):
    """Returns ``(y, mask)``; the mask is ``None`` when dropout is inactive."""
    if not 0.0 <= rate < 1.0:
        raise DomainError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise StateError("training-mode dropout needs an explicit rng")
    mask = (rng.random(np.shape(x)) >= rate) / (1.0 - rate)
    return x * mask, mask


# -- network --------------------------------------------------------------

class Network:
    """A plain stack of layers plus the architecture string it was built from."""

    def __init__(self, layers, architecture: str = "", task: str = "classification"):
        self.layers = list(layers)
        self.architecture = architecture
        self.task = task

    def forward(self, x, training=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def predict(self, x):
        out = self.forward(x, training=False)
        return out[:, 0] if self.task == "regression" else out

    def parameters(self):
        """Yield ``(key, array)`` pairs in a fixed order."""
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield f"{i}.{name}", layer.params[name]

    def gradients(self):
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield f"{i}.{name}", layer.grads[name]

    def state(self) -> dict[str, np.ndarray]:
        return dict(self.parameters())

    def load_state(self, state: dict) -> None:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                value = np.asarray(state[f"{i}.{name}"], dtype=np.float64)
                if value.shape != layer.params[name].shape:
                    raise ShapeError(f"parameter {i}.{name}: expected {layer.params[name].shape}, got {value.shape}")
                layer.params[name] = value.copy()

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)


# -- losses and metrics ---------------------------------------------------

def _labels0(labels, n_classes):
    labels = np.asarray(labels)
    if labels.min() < 1 or labels.max() > n_classes:
        raise ValidationError(f"labels must lie in [1, {n_classes}]")
    return labels.astype(np.int64) - 1


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood of 1-based ``labels``; returns ``(loss, grad)``."""
    logits = np.asarray(logits, dtype=np.float64)
    S, C = logits.shape
    y = _labels0(labels, C)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_z[:, None]
    loss = -float(np.mean(log_p[np.arange(S), y]))
    grad = np.exp(log_p)
    grad[np.arange(S), y] -= 1.0
    return loss, grad / S


def rmse_loss(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.sqrt(np.mean(diff**2)))
    if loss == 0.0:
        return 0.0, np.zeros_like(pred)
    return loss, diff / (diff.size * loss)


def metric_accuracy(logits, labels) -> float:
    pred = np.argmax(np.asarray(logits), axis=1) + 1
    return float(np.mean(pred == np.asarray(labels)))


def metric_r2(pred, target) -> float:
    """Squared Pearson correlation between predictions and targets."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if np.std(target) == 0:
        raise DomainError("R^2 is undefined for constant targets")
    if np.std(pred) == 0:
        return 0.0
    r = np.corrcoef(pred, target)[0, 1]
    return float(r * r)
