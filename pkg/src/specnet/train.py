"""Network assembly from architecture strings, AdaGrad, and training loops."""
from __future__ import annotations

import logging
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .clustering import ClusterHierarchy, build_pooling_map
from .data import LabeledDataset
from .errors import ConfigError, NumericalError, ShapeError
from .io import read_json, read_matrix, write_json, write_matrix
from .spectral import SpectralBasis, SplineKernel, build_spline_kernel, graph_basis

log = logging.getLogger(__name__)

_TOKEN = re.compile(r"^(GC|P|FC)([1-9][0-9]*)$")


def parse_architecture(arch: str) -> list[tuple[str, int]]:
    """Split e.g. ``"GC4-P4-FC1000"`` into ``[("GC", 4), ("P", 4), ("FC", 1000)]``.

    Graph layers (GC, P) must all precede the fully connected ones.
    """
    if not arch:
        return []
    out = []
    seen_fc = False
    for tok in arch.split("-"):
        m = _TOKEN.match(tok.strip())
        if m is None:
            raise ConfigError(f"cannot parse architecture {arch!r} at token {tok!r}")
        kind, k = m.group(1), int(m.group(2))
        if kind == "FC":
            seen_fc = True
        elif seen_fc:
            raise ConfigError(f"graph layer {tok!r} after a fully connected layer in {arch!r}")
        out.append((kind, k))
    return out


def pool_strides(arch: str) -> list[int]:
    return [k for kind, k in parse_architecture(arch) if kind == "P"]


@dataclass
class GraphArtifacts:
    """Everything a spectral network needs from the graph: the cluster
    hierarchy and one eigenbasis per hierarchy level (computed lazily)."""

    hierarchy: ClusterHierarchy
    bases: dict = field(default_factory=dict)

    def basis(self, level: int) -> SpectralBasis:
        if level not in self.bases:
            self.bases[level] = graph_basis(self.hierarchy.graph(level))
        return self.bases[level]

    @property
    def n(self) -> int:
        return self.hierarchy.levels[0][0].n


def spline_for(n: int, n0: int) -> SplineKernel:
    if n == 1:
        return SplineKernel(np.ones((1, 1)), np.zeros(1, dtype=np.int64))
    return build_spline_kernel(n, min(n0, n))


class AddChannel(nn.Layer):
    """``(S, N) -> (S, 1, N)`` so raw samples enter the graph part as one map."""

    def forward(self, x, training=False, rng=None):
        return x[:, None, :]

    def backward(self, grad_out):
        return grad_out[:, 0, :]


def build_network(arch: str, n_inputs: int, n_outputs: int, artifacts: GraphArtifacts | None = None,
                  n0: int = 60, pooling: str = "max", dropout: float = 0.0, seed: int = 0,
                  task: str = "classification", bias: bool = True) -> nn.Network:
    """Assemble GC -> ReLU, pooling, and FC -> ReLU (-> dropout) blocks, then a
    linear output layer with ``n_outputs`` units."""
    tokens = parse_architecture(arch)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    layers: list[nn.Layer] = []
    graph_tokens = [t for t in tokens if t[0] != "FC"]
    width = n_inputs
    if graph_tokens:
        if artifacts is None:
            raise ConfigError(f"architecture {arch!r} has graph layers but no graph was given")
        if artifacts.n != n_inputs:
            raise ShapeError(f"graph has {artifacts.n} nodes but data has {n_inputs} features")
        strides = [k for kind, k in graph_tokens if kind == "P"]
        if tuple(strides) != tuple(artifacts.hierarchy.strides[: len(strides)]):
            raise ConfigError(
                f"pooling strides {strides} in {arch!r} do not match the hierarchy strides "
                f"{list(artifacts.hierarchy.strides)}"
            )
        layers.append(AddChannel())
        level, maps = 0, 1
        for kind, k in graph_tokens:
            if kind == "GC":
                basis = artifacts.basis(level)
                layers.append(nn.GraphConv(basis, spline_for(basis.n, n0), maps, k, rng, bias))
                layers.append(nn.ReLU())
                maps = k
            else:
                level += 1
                layers.append(nn.GraphPool(build_pooling_map(artifacts.hierarchy, level, pooling)))
        layers.append(nn.Flatten())
        width = maps * artifacts.hierarchy.sizes[level]
    for kind, k in tokens:
        if kind != "FC":
            continue
        layers.append(nn.Dense(width, k, rng))
        layers.append(nn.ReLU())
        if dropout > 0:
            layers.append(nn.Dropout(dropout))
        width = k
    layers.append(nn.Dense(width, n_outputs, rng))
    return nn.Network(layers, arch, task)


def architecture_parameter_count(arch: str, level_sizes, n0: int, n_outputs: int,
                                 n_inputs: int | None = None, bias: bool = True) -> int:
    """Closed-form count of trainable parameters; ``level_sizes`` are node counts per level."""
    total, level, maps = 0, 0, 1
    width = n_inputs if n_inputs is not None else level_sizes[0]
    graph = False
    for kind, k in parse_architecture(arch):
        if kind == "GC":
            graph = True
            eff = 1 if level_sizes[level] == 1 else min(n0, level_sizes[level])
            total += k * maps * eff + (k if bias else 0)
            maps = k
        elif kind == "P":
            graph = True
            level += 1
        else:
            if graph:
                width, graph = maps * level_sizes[level], False
            total += width * k + k
            width = k
    if graph:
        width = maps * level_sizes[level]
    return total + width * n_outputs + n_outputs


def count_net_parameters(network: nn.Network | None) -> int:
    return 0 if network is None else network.n_params


# -- optimizer ------------------------------------------------------------

@dataclass
class AdaGradState:
    learning_rate: float = 0.01
    epsilon: float = 1e-8
    accumulators: dict = field(default_factory=dict)


def adagrad_step(state: AdaGradState, params: dict, grads: dict) -> None:
    """In-place update ``theta -= lr * g / (sqrt(acc) + eps)`` after ``acc += g**2``."""
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {key} has shape {g.shape}, parameter {p.shape}")
        acc = state.accumulators.get(key)
        if acc is None:
            acc = state.accumulators[key] = np.zeros_like(p)
        acc += g * g
        p -= state.learning_rate * g / (np.sqrt(acc) + state.epsilon)


# -- training -------------------------------------------------------------

@dataclass
class TrainConfig:
    architecture: str = ""
    learning_rate: float = 0.01
    epochs: int = 10
    batch_size: int = 128
    pooling: str = "max"
    n0: int = 60
    dropout: float = 0.0
    seed: int = 0
    task: str = "classification"
    epsilon: float = 1e-8
    bias: bool = True
    log_epochs: tuple = (200, 1500)
    checkpoint_every: int = 0

    def __post_init__(self):
        parse_architecture(self.architecture)
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.pooling not in ("max", "average"):
            raise ConfigError(f"pooling must be 'max' or 'average', got {self.pooling!r}")
        if self.n0 < 2:
            raise ConfigError("n0 must be at least 2")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.task not in ("classification", "regression"):
            raise ConfigError(f"unknown task {self.task!r}")
        self.log_epochs = tuple(self.log_epochs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["log_epochs"] = list(self.log_epochs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


def n_outputs(ds: LabeledDataset) -> int:
    return ds.n_classes if ds.task == "classification" else 1


def network_for(config: TrainConfig, ds: LabeledDataset, artifacts=None) -> nn.Network:
    return build_network(config.architecture, ds.features.n_features, n_outputs(ds), artifacts,
                         config.n0, config.pooling, config.dropout, config.seed, ds.task, config.bias)


def loss_and_grad(out: np.ndarray, targets: np.ndarray, task: str):
    if task == "classification":
        return nn.softmax_cross_entropy(out, targets)
    loss, grad = nn.rmse_loss(out[:, 0], targets)
    return loss, grad[:, None]


def _layer_norms(network: nn.Network) -> dict:
    return {key: float(np.linalg.norm(p)) for key, p in network.parameters()}


@dataclass
class FitResult:
    network: nn.Network
    history: list
    optimizer: AdaGradState


def fit(config: TrainConfig, train: LabeledDataset, valid: LabeledDataset | None = None,
        artifacts: GraphArtifacts | None = None, network: nn.Network | None = None,
        run_dir=None, resume_from=None) -> FitResult:
    """Mini-batch AdaGrad training.

    The run is a deterministic function of ``config.seed``. With ``run_dir``
    set, ``config.json``, ``history.csv`` and checkpoints are written there;
    ``resume_from`` continues from a checkpoint directory and reproduces the
    uninterrupted trajectory exactly.
    """
    if network is None:
        network = network_for(config, train, artifacts)
    opt = AdaGradState(config.learning_rate, config.epsilon)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    history: list[dict] = []
    start = 0
    if resume_from is not None:
        start, history = load_checkpoint(resume_from, network, opt, rng)

    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        write_json(run_dir / "config.json", config.to_dict())

    params = dict(network.parameters())
    n = len(train)
    X, y = train.X, train.targets
    elapsed = history[-1]["wall_seconds"] if history else 0.0
    for epoch in range(start + 1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo: lo + config.batch_size]
            out = network.forward(X[idx], training=True, rng=rng)
            loss, grad = loss_and_grad(out, y[idx], train.task)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}; parameter norms: {_layer_norms(network)}"
                )
            network.backward(grad)
            adagrad_step(opt, params, dict(network.gradients()))
            total += loss * len(idx)
        elapsed += time.perf_counter() - t0
        record = {"epoch": epoch, "train_loss": total / n,
                  "val_metric": evaluate(network, valid)["metric"] if valid is not None else float("nan"),
                  "wall_seconds": elapsed}
        history.append(record)
        if epoch in config.log_epochs:
            log.info("epoch %d: train_loss=%.6f val_metric=%.6f", epoch, record["train_loss"], record["val_metric"])
        if run_dir is not None:
            write_history(run_dir / "history.csv", history)
            every = config.checkpoint_every
            if epoch == config.epochs or epoch in config.log_epochs or (every and epoch % every == 0):
                save_checkpoint(run_dir / "checkpoints" / f"epoch_{epoch}", network, opt, rng, epoch,
                                history, config)
    if run_dir is not None and not history:
        write_history(run_dir / "history.csv", history)
    return FitResult(network, history, opt)


def evaluate(network: nn.Network, ds: LabeledDataset, batch_size: int = 1024) -> dict:
    """Loss plus accuracy (classification) or squared correlation (regression), dropout off."""
    outs = [network.forward(ds.X[lo: lo + batch_size], training=False)
            for lo in range(0, len(ds), batch_size)]
    out = np.concatenate(outs, axis=0)
    loss, _ = loss_and_grad(out, ds.targets, ds.task)
    report = {"loss": loss, "n_params": count_net_parameters(network)}
    if ds.task == "classification":
        report["accuracy"] = report["metric"] = nn.metric_accuracy(out, ds.targets)
    else:
        report["r2"] = report["metric"] = nn.metric_r2(out[:, 0], ds.targets)
    return report


@dataclass
class FCProxy:
    network: nn.Network
    W1: np.ndarray
    history: list


def train_fc_proxy(dataset: LabeledDataset, hidden=(256,), epochs: int = 20, learning_rate: float = 0.01,
                   dropout: float = 0.5, batch_size: int = 128, seed: int = 0) -> FCProxy:
    """Train a ReLU + dropout fully connected net and return its first-layer
    weights, one row per input feature. Inputs are expected to be z-scored."""
    arch = "-".join(f"FC{h}" for h in hidden)
    config = TrainConfig(arch, learning_rate, epochs, batch_size, dropout=dropout, seed=seed,
                         task=dataset.task, log_epochs=())
    result = fit(config, dataset)
    W1 = result.network.layers[0].params["W"].copy()
    return FCProxy(result.network, W1, result.history)


# -- persistence ----------------------------------------------------------

HISTORY_FIELDS = ("epoch", "train_loss", "val_metric", "wall_seconds")


def write_history(path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(HISTORY_FIELDS) + "\n")
        for rec in history:
            fh.write(f"{rec['epoch']},{rec['train_loss']!r},{rec['val_metric']!r},{rec['wall_seconds']!r}\n")


def read_history(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            e, tl, vm, ws = line.strip().split(",")
            rows.append({"epoch": int(e), "train_loss": float(tl), "val_metric": float(vm),
                         "wall_seconds": float(ws)})
    return rows


def _blob_name(key: str) -> str:
    return key.replace(".", "_") + ".sgn"


def _as_matrix(a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[0], -1) if a.ndim > 1 else a.reshape(-1, 1)


def save_checkpoint(path, network: nn.Network, opt: AdaGradState, rng, epoch: int, history, config=None):
    """Manifest JSON plus one SGN1 blob per parameter and AdaGrad accumulator."""
    path = Path(path)
    (path / "params").mkdir(parents=True, exist_ok=True)
    (path / "adagrad").mkdir(parents=True, exist_ok=True)
    shapes = {}
    for key, p in network.parameters():
        shapes[key] = list(p.shape)
        write_matrix(path / "params" / _blob_name(key), _as_matrix(p))
        acc = opt.accumulators.get(key)
        if acc is not None:
            write_matrix(path / "adagrad" / _blob_name(key), _as_matrix(acc))
    manifest = {
        "format": "specnet-checkpoint-1",
        "architecture": network.architecture,
        "task": network.task,
        "epoch": int(epoch),
        "shapes": shapes,
        "optimizer": {"learning_rate": opt.learning_rate, "epsilon": opt.epsilon,
                      "has_state": sorted(opt.accumulators)},
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "seed": None if config is None else config.seed,
        "history": history,
    }
    write_json(path / "manifest.json", manifest)


def load_checkpoint(path, network: nn.Network, opt: AdaGradState | None = None, rng=None):
    """Restore parameters (and optionally optimizer and rng state) in place.

    Returns ``(epoch, history)``.
    """
    path = Path(path)
    manifest = read_json(path / "manifest.json")
    if manifest.get("architecture") != network.architecture:
        raise ConfigError(
            f"checkpoint architecture {manifest.get('architecture')!r} != {network.architecture!r}"
        )
    state = {}
    for key, shape in manifest["shapes"].items():
        state[key] = read_matrix(path / "params" / _blob_name(key)).reshape(shape)
    network.load_state(state)
    if opt is not None:
        opt.accumulators = {
            key: read_matrix(path / "adagrad" / _blob_name(key)).reshape(manifest["shapes"][key])
            for key in manifest["optimizer"]["has_state"]
        }
    if rng is not None and manifest.get("rng_state") is not None:
        rng.bit_generator.state = manifest["rng_state"]
    return int(manifest["epoch"]), list(manifest["history"])


def latest_checkpoint(run_dir) -> Path | None:
    ckpts = sorted(Path(run_dir, "checkpoints").glob("epoch_*"), key=lambda p: int(p.name.split("_")[1]))
    return ckpts[-1] if ckpts else None
