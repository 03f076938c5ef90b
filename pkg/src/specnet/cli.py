"""Command-line pipeline.

Stages talk to each other only through files in the ``--out`` directory::

    specnet estimate-graph  --config run.json --out work/
    specnet build-basis     --config run.json --out work/
    specnet build-hierarchy --config run.json --out work/
    specnet train           --config run.json --out work/
    specnet evaluate        --config run.json --out work/
    specnet gradcheck

Exit codes: 0 success, 1 validation or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import build_hierarchy, hierarchy_from_assignments
from .data import (FeatureMatrix, LabeledDataset, Normalizer, SplitSpec, load_dataset, load_merck_csv, split,
                   zscore_normalize)
from .errors import ConfigError, NumericalError, SpecNetError, ValidationError
from .gradcheck import run_gradcheck
from .graph import (METHODS, SimilarityGraph, count_graph_parameters, gaussian_kernel, known_graph,
                    low_rank_project, pairwise_sq_distances, self_tuning_kernel, supervised_distance)
from .io import array_hash, read_json, read_matrix, write_json, write_matrix
from .spectral import SpectralBasis, graph_basis
from .train import (GraphArtifacts, TrainConfig, evaluate, fit, latest_checkpoint, load_checkpoint,
                    network_for, parse_architecture, pool_strides, train_fc_proxy)

log = logging.getLogger("specnet")

GRAPH_FILE = "graph.sgn"
GRAPH_META = "graph.json"
BASIS_VALUES = "basis_eigenvalues.sgn"
BASIS_VECTORS = "basis_U.sgn"
BASIS_META = "basis.json"
HIERARCHY_META = "hierarchy.json"
RUN_DIR = "run"


# -- configuration --------------------------------------------------------

@dataclass
class RunConfig:
    data: dict
    graph: dict
    strides: list
    train: TrainConfig
    evaluate: dict
    base: Path

    @classmethod
    def load(cls, path, seed: int | None = None) -> "RunConfig":
        path = Path(path)
        try:
            raw = read_json(path)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(raw, path.parent, seed)

    @classmethod
    def from_dict(cls, raw: dict, base=Path("."), seed: int | None = None) -> "RunConfig":
        unknown = set(raw) - {"data", "graph", "strides", "train", "evaluate"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        data = dict(raw.get("data") or {})
        if "features" not in data:
            raise ConfigError("data.features is required")
        data.setdefault("format", "csv")
        data.setdefault("task", "classification")
        data.setdefault("normalization", [])
        data.setdefault("validation_fraction", 0.1)
        data.setdefault("split_seed", 0)
        if data["format"] not in ("csv", "binary", "merck"):
            raise ConfigError(f"data.format must be csv, binary or merck, got {data['format']!r}")
        if data["format"] != "merck" and "labels" not in data:
            raise ConfigError("data.labels is required unless data.format is 'merck'")

        graph = dict(raw.get("graph") or {"method": "known"})
        method = graph.get("method")
        if method not in METHODS:
            raise ConfigError(f"unknown graph method {method!r}; valid methods: {', '.join(METHODS)}")
        if method == "supervised-lowrank" and not graph.get("m"):
            raise ConfigError("graph method 'supervised-lowrank' requires m")
        if method == "rbf-local":
            graph.setdefault("knn_k", 10)
        graph.setdefault("proxy", {})

        train = dict(raw.get("train") or {})
        train.setdefault("task", data["task"])
        if seed is not None:
            train["seed"] = seed
        train_cfg = TrainConfig.from_dict(train)

        strides = list(raw.get("strides", pool_strides(train_cfg.architecture)))
        if pool_strides(train_cfg.architecture) != strides[: len(pool_strides(train_cfg.architecture))]:
            raise ConfigError(
                f"architecture {train_cfg.architecture!r} pools with {pool_strides(train_cfg.architecture)} "
                f"but strides are {strides}"
            )
        return cls(data, graph, strides, train_cfg, dict(raw.get("evaluate") or {}), Path(base))

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    @property
    def seed(self) -> int:
        return self.train.seed

    def uses_graph(self) -> bool:
        return any(kind != "FC" for kind, _ in parse_architecture(self.train.architecture))


def _read_dataset(cfg: RunConfig, features, labels) -> LabeledDataset:
    d = cfg.data
    if d["format"] == "merck":
        return load_merck_csv(cfg.path(features))
    return load_dataset(cfg.path(features), cfg.path(labels), d["format"], d["task"], d.get("n_classes"))


def prepare_data(cfg: RunConfig):
    """Load, split and normalize. Statistics are fitted on the training part only."""
    ds = _read_dataset(cfg, cfg.data["features"], cfg.data.get("labels"))
    train, valid = split(ds, SplitSpec(cfg.data["validation_fraction"], cfg.data["split_seed"]))
    norm = Normalizer(list(cfg.data["normalization"]))
    train = _with_features(train, norm.fit_transform(train.features))
    valid = _with_features(valid, norm.transform(valid.features))
    return train, valid, norm


def _with_features(ds: LabeledDataset, features: FeatureMatrix) -> LabeledDataset:
    return LabeledDataset(features, ds.targets, ds.task, ds.n_classes)


# -- stages ---------------------------------------------------------------

def estimate_graph(cfg: RunConfig, train: LabeledDataset) -> tuple[SimilarityGraph, dict]:
    g = cfg.graph
    method = g["method"]
    n = train.features.n_features
    extra = {}
    if method == "known":
        if "path" not in g:
            raise ConfigError("graph method 'known' needs graph.path to a weight matrix")
        p = cfg.path(g["path"])
        w = read_matrix(p) if p.suffix == ".sgn" else np.loadtxt(p, delimiter=",", ndmin=2)
        graph = known_graph(w, {"source": str(p)})
    elif method in ("rbf", "rbf-local"):
        D = pairwise_sq_distances(train.features)
        graph = gaussian_kernel(D, g.get("sigma")) if method == "rbf" else self_tuning_kernel(D, int(g["knn_k"]))
    else:
        proxy_cfg = dict(g["proxy"])
        proxy_cfg.setdefault("seed", cfg.seed)
        X = train.features
        if "zscore" not in cfg.data["normalization"]:
            X, _, _ = zscore_normalize(X)
        proxy = train_fc_proxy(_with_features(train, X), **_proxy_kwargs(proxy_cfg))
        graph = gaussian_kernel(supervised_distance(proxy.W1), g.get("sigma"))
        graph = SimilarityGraph(graph.weights, dict(graph.info, method="supervised"))
        extra["proxy_final_loss"] = proxy.history[-1]["train_loss"] if proxy.history else None
        if method == "supervised-lowrank":
            graph = low_rank_project(graph, int(g["m"]))
    if graph.n != n:
        raise ValidationError(f"graph has {graph.n} nodes but data has {n} features")
    meta = {k: v for k, v in graph.info.items() if k != "sigmas"}
    meta.update(extra, method=method, n=graph.n,
                parameters=count_graph_parameters(method, n, g.get("m")))
    return graph, meta


def _proxy_kwargs(d: dict) -> dict:
    allowed = {"hidden", "epochs", "learning_rate", "dropout", "batch_size", "seed"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown proxy options: {sorted(unknown)}")
    out = dict(d)
    if "hidden" in out:
        out["hidden"] = tuple(out["hidden"])
    return out


def cmd_estimate_graph(cfg: RunConfig, out: Path) -> int:
    train, _, _ = prepare_data(cfg)
    graph, meta = estimate_graph(cfg, train)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / GRAPH_FILE, graph.weights)
    meta["source_hash"] = array_hash(train.X)
    meta["graph_hash"] = array_hash(graph.weights)
    write_json(out / GRAPH_META, meta)
    print(f"wrote {out / GRAPH_FILE}: {graph.n} nodes, method={meta['method']}")
    return 0


def load_graph(out: Path) -> SimilarityGraph:
    meta = read_json(out / GRAPH_META)
    w = read_matrix(out / GRAPH_FILE)
    if array_hash(w) != meta["graph_hash"]:
        raise ValidationError(f"{out / GRAPH_FILE} does not match the hash in {GRAPH_META}")
    return SimilarityGraph(w, meta, unit_diagonal=meta["method"] != "known")


def cmd_build_basis(cfg: RunConfig, out: Path) -> int:
    graph = load_graph(out)
    basis = graph_basis(graph)
    write_matrix(out / BASIS_VALUES, basis.eigenvalues)
    write_matrix(out / BASIS_VECTORS, basis.U)
    write_json(out / BASIS_META, {"graph_hash": array_hash(graph.weights), "n": basis.n,
                                  "rows_are_eigenvectors": True})
    print(f"wrote basis for {basis.n} nodes; smallest eigenvalue {basis.eigenvalues[0]:.3e}")
    return 0


def load_basis(out: Path, graph: SimilarityGraph) -> SpectralBasis:
    meta = read_json(out / BASIS_META)
    if meta["graph_hash"] != array_hash(graph.weights):
        raise ValidationError("stored basis was computed for a different graph; rerun build-basis")
    return SpectralBasis(read_matrix(out / BASIS_VALUES)[:, 0], read_matrix(out / BASIS_VECTORS))


def cmd_build_hierarchy(cfg: RunConfig, out: Path) -> int:
    graph = load_graph(out)
    h = build_hierarchy(graph, cfg.strides, cfg.seed)
    meta = h.to_dict()
    meta["graph_hash"] = array_hash(graph.weights)
    for level in range(1, len(h.levels)):
        write_matrix(out / f"hierarchy_level_{level}.sgn", h.graph(level).weights)
    write_json(out / HIERARCHY_META, meta)
    print(f"wrote hierarchy with level sizes {h.sizes}")
    return 0


def load_artifacts(cfg: RunConfig, out: Path) -> GraphArtifacts | None:
    if not cfg.uses_graph():
        return None
    for name in (GRAPH_FILE, BASIS_VALUES, HIERARCHY_META):
        if not (out / name).exists():
            raise ConfigError(f"missing {out / name}; run the earlier pipeline stages first")
    graph = load_graph(out)
    meta = read_json(out / HIERARCHY_META)
    if meta["graph_hash"] != array_hash(graph.weights):
        raise ValidationError("hierarchy was built for a different graph; rerun build-hierarchy")
    h = hierarchy_from_assignments(graph, meta["strides"], meta["seed"], meta["assignments"])
    artifacts = GraphArtifacts(h)
    artifacts.bases[0] = load_basis(out, graph)
    return artifacts


def cmd_train(cfg: RunConfig, out: Path, resume: bool = False) -> int:
    train, valid, norm = prepare_data(cfg)
    try:
        artifacts = load_artifacts(cfg, out)
        network = network_for(cfg.train, train, artifacts)
    except SpecNetError as exc:
        raise type(exc)(f"train: building network failed: {exc}") from exc
    run_dir = out / RUN_DIR
    start = latest_checkpoint(run_dir) if resume else None
    result = fit(cfg.train, train, valid, artifacts, network, run_dir=run_dir, resume_from=start)
    write_json(run_dir / "normalizer.json", norm.to_dict())
    final = result.history[-1]["val_metric"] if result.history else float("nan")
    print(f"final validation metric: {final:.6f}")
    return 0


def cmd_evaluate(cfg: RunConfig, out: Path) -> int:
    run_dir = out / RUN_DIR
    ckpt = latest_checkpoint(run_dir)
    if ckpt is None:
        raise ConfigError(f"no checkpoints under {run_dir}; run train first")
    train, valid, _ = prepare_data(cfg)
    norm = Normalizer.from_dict(read_json(run_dir / "normalizer.json"))
    network = network_for(cfg.train, train, load_artifacts(cfg, out))
    load_checkpoint(ckpt, network)
    if cfg.evaluate.get("features"):
        ds = _read_dataset(cfg, cfg.evaluate["features"], cfg.evaluate.get("labels"))
        ds = _with_features(ds, norm.transform(ds.features))
        split_name = "test"
    else:
        ds, split_name = valid, "validation"
    report = evaluate(network, ds)
    report.update(split=split_name, checkpoint=ckpt.name, architecture=cfg.train.architecture)
    if (out / GRAPH_META).exists() and cfg.uses_graph():
        report["graph_parameters"] = read_json(out / GRAPH_META).get("parameters")
    write_json(run_dir / "evaluation.json", report)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_gradcheck(seed: int, n: int, n0: int, corrupt: str | None = None) -> int:
    results = run_gradcheck(seed=seed, n=n, n0=n0, corrupt=corrupt)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name:32s} rel_err={r.rel_error:.3e}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"gradcheck failed for: {', '.join(failed)}")
        return 2
    print(f"all {len(results)} gradient checks passed")
    return 0


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specnet", description="Spectral networks on estimated graphs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("estimate-graph", "build-basis", "build-hierarchy", "train", "evaluate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="working directory shared by the stages")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        if name == "train":
            p.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")
    p = sub.add_parser("gradcheck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=16)
    p.add_argument("--n0", type=int, default=5)
    p.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args.seed, args.nodes, args.n0, args.corrupt)
        cfg = RunConfig.load(args.config, args.seed)
        out = Path(args.out)
        if args.command == "estimate-graph":
            return cmd_estimate_graph(cfg, out)
        if args.command == "build-basis":
            return cmd_build_basis(cfg, out)
        if args.command == "build-hierarchy":
            return cmd_build_hierarchy(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out, args.resume)
        return cmd_evaluate(cfg, out)
    except NumericalError as exc:
        print(f"specnet: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (SpecNetError, FileNotFoundError, KeyError) as exc:
        print(f"specnet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
