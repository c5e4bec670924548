"""Graph encoders: GCN, GIN, ChebNet, FAGCN, and a structure-blind FCN baseline.

Every architecture maps categorical node attributes through summed embedding
tables, stacks ``layers`` propagation layers, mean-pools to a graph embedding,
and optionally applies a linear classification head.  Graphs are processed
one at a time with dense propagation matrices (desk-scale sizes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import DataError
from .graphs import GraphCorpus, LabeledGraph
from .spectral import SYM_NORMALIZED, laplacian

ARCHS = ("gcn", "gin", "chebnet", "fagcn", "fcn")


@dataclass(frozen=True)
class GnnConfig:
    arch: str
    layers: int = 5
    hidden_dim: int = 300
    cheb_order: int = 3
    fagcn_eps: float = 0.3
    dropout: float = 0.5
    attr_sizes: tuple[int, ...] = ()
    task_count: int = 0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise DataError(f"unknown architecture {self.arch!r}")
        if self.layers < 1 or self.hidden_dim < 1 or self.cheb_order < 1:
            raise DataError("layers, hidden_dim and cheb_order must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError(f"dropout {self.dropout} outside [0,1)")
        if not self.attr_sizes:
            raise DataError("attr_sizes must list one alphabet size per attribute slot")

    def to_dict(self) -> dict:
        return {
            "arch": self.arch, "layers": self.layers, "hidden_dim": self.hidden_dim,
            "cheb_order": self.cheb_order, "fagcn_eps": self.fagcn_eps,
            "dropout": self.dropout, "attr_sizes": list(self.attr_sizes),
            "task_count": self.task_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GnnConfig":
        return cls(arch=d["arch"], layers=int(d["layers"]), hidden_dim=int(d["hidden_dim"]),
                   cheb_order=int(d["cheb_order"]), fagcn_eps=float(d["fagcn_eps"]),
                   dropout=float(d["dropout"]), attr_sizes=tuple(int(x) for x in d["attr_sizes"]),
                   task_count=int(d["task_count"]))


@dataclass
class GnnModel:
    config: GnnConfig
    params: dict[str, T.Tensor] = field(default_factory=dict)

    def parameters(self) -> list[T.Tensor]:
        return list(self.params.values())

    def param_items(self) -> dict[str, T.Tensor]:
        return self.params


def infer_attr_sizes(corpus: GraphCorpus) -> tuple[int, ...]:
    """Embedding-table sizes: per-slot attribute maximum + 1 across the corpus."""
    slots: Optional[int] = None
    maxima: list[int] = []
    for g in corpus:
        for attrs in g.node_attrs:
            if slots is None:
                slots = len(attrs)
                maxima = [0] * slots
            elif len(attrs) != slots:
                raise DataError(f"graph {g.id!r}: inconsistent attribute slot count")
            for s, a in enumerate(attrs):
                maxima[s] = max(maxima[s], a)
    if slots is None or slots == 0:
        raise DataError("corpus has no node attributes to embed")
    return tuple(m + 1 for m in maxima)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(config: GnnConfig, seed: int) -> GnnModel:
    """Seeded parameter initialization (Glorot uniform weights, zero biases)."""
    rng = np.random.default_rng(seed)
    h = config.hidden_dim
    params: dict[str, T.Tensor] = {}

    def add(name, arr):
        params[name] = T.Tensor(arr, requires_grad=True)

    for s, size in enumerate(config.attr_sizes):
        add(f"embed.{s}", _glorot(rng, size, h, (size, h)))
    if config.arch == "fagcn":
        add("proj.w", _glorot(rng, h, h, (h, h)))
    for l in range(config.layers):
        if config.arch in ("gcn", "fcn"):
            add(f"layer{l}.theta", _glorot(rng, h, h, (h, h)))
        elif config.arch == "gin":
            add(f"layer{l}.eps", np.asarray(0.0))
            add(f"layer{l}.w1", _glorot(rng, h, h, (h, h)))
            add(f"layer{l}.b1", np.zeros(h))
            add(f"layer{l}.w2", _glorot(rng, h, h, (h, h)))
            add(f"layer{l}.b2", np.zeros(h))
        elif config.arch == "chebnet":
            for k in range(config.cheb_order):
                add(f"layer{l}.theta{k}", _glorot(rng, h, h, (h, h)))
        elif config.arch == "fagcn":
            add(f"layer{l}.g", rng.uniform(-1.0, 1.0, size=2 * h) / np.sqrt(2 * h))
    if config.task_count > 0:
        add("head.w", _glorot(rng, h, config.task_count, (h, config.task_count)))
        add("head.b", np.zeros(config.task_count))
    return GnnModel(config=config, params=params)


def _input_features(model: GnnModel, g: LabeledGraph) -> T.Tensor:
    cfg = model.config
    h0 = None
    for s, size in enumerate(cfg.attr_sizes):
        idx = []
        for v, attrs in enumerate(g.node_attrs):
            if s >= len(attrs):
                raise DataError(f"graph {g.id!r}: node {v} missing attribute slot {s}")
            if attrs[s] >= size:
                raise DataError(
                    f"graph {g.id!r}: attribute {attrs[s]} out of embedding range {size}")
            idx.append(attrs[s])
        looked = T.index_select(model.params[f"embed.{s}"], np.asarray(idx))
        h0 = looked if h0 is None else h0 + looked
    return h0


def _gcn_propagation(g: LabeledGraph) -> np.ndarray:
    """Dense D~^{-1/2} (A+I) D~^{-1/2} with self-loops."""
    a = g.adjacency() + np.eye(g.node_count)
    d = a.sum(axis=1)
    dinv = 1.0 / np.sqrt(d)
    return (dinv[:, None] * a) * dinv[None, :]


def _directed_edges(g: LabeledGraph) -> tuple[np.ndarray, np.ndarray]:
    src = np.fromiter((e[i] for e in g.edges for i in (0, 1)), dtype=np.int64,
                      count=2 * g.edge_count)
    dst = np.fromiter((e[i] for e in g.edges for i in (1, 0)), dtype=np.int64,
                      count=2 * g.edge_count)
    return src, dst


def encode_nodes(model: GnnModel, g: LabeledGraph, training: bool = False,
                 rng: Optional[np.random.Generator] = None) -> T.Tensor:
    """Node embedding matrix (n x hidden) after the full layer stack."""
    cfg = model.config
    if g.node_count == 0:
        raise DataError(f"graph {g.id!r}: cannot encode an empty graph")
    if training and cfg.dropout > 0.0 and rng is None:
        raise DataError("training-mode forward with dropout needs an rng")
    h = _input_features(model, g)
    p = model.params

    if cfg.arch == "gcn":
        prop = T.Tensor(_gcn_propagation(g))
        for l in range(cfg.layers):
            h = T.relu(prop @ (h @ p[f"layer{l}.theta"]))
            h = _between_layers(h, l, cfg, training, rng)
        return h

    if cfg.arch == "fcn":
        for l in range(cfg.layers):
            h = T.relu(h @ p[f"layer{l}.theta"])
            h = _between_layers(h, l, cfg, training, rng)
        return h

    if cfg.arch == "gin":
        adj = T.Tensor(g.adjacency())
        for l in range(cfg.layers):
            agg = (adj @ h) + ((p[f"layer{l}.eps"] + 1.0) * h)
            mid = T.relu(agg @ p[f"layer{l}.w1"] + p[f"layer{l}.b1"])
            h = mid @ p[f"layer{l}.w2"] + p[f"layer{l}.b2"]
            h = _between_layers(h, l, cfg, training, rng)
        return h

    if cfg.arch == "chebnet":
        # scaled Laplacian 2 L_norm / lambda_max - I with lambda_max fixed at 2
        lhat = T.Tensor(laplacian(g, SYM_NORMALIZED).matrix - np.eye(g.node_count))
        for l in range(cfg.layers):
            xk_prev = None
            xk = h
            out = xk @ p[f"layer{l}.theta0"]
            for k in range(1, cfg.cheb_order):
                if k == 1:
                    xk_prev, xk = xk, lhat @ xk
                else:
                    xk_prev, xk = xk, 2.0 * (lhat @ xk) - xk_prev
                out = out + xk @ p[f"layer{l}.theta{k}"]
            h = T.relu(out)
            h = _between_layers(h, l, cfg, training, rng)
        return h

    # fagcn: residual propagation around a projected input, edge attention
    # tanh(g . [h_i || h_j]) scaled by 1/sqrt(d_i d_j)
    h0 = T.relu(h @ p["proj.w"])
    deg = g.degrees().astype(np.float64)
    h = h0
    if g.edge_count == 0:
        for l in range(cfg.layers):
            h = cfg.fagcn_eps * h0
            h = _between_layers(h, l, cfg, training, rng)
        return h
    src, dst = _directed_edges(g)
    norm = T.Tensor((1.0 / np.sqrt(deg[dst] * deg[src])).reshape(-1, 1))
    for l in range(cfg.layers):
        h_src = T.index_select(h, src)
        h_dst = T.index_select(h, dst)
        alpha = T.tanh(T.concat([h_dst, h_src], axis=1) @ p[f"layer{l}.g"])
        coeff = T.reshape(alpha, (-1, 1)) * norm
        agg = T.scatter_add(coeff * h_src, dst, g.node_count)
        h = cfg.fagcn_eps * h0 + agg
        h = _between_layers(h, l, cfg, training, rng)
    return h


def _between_layers(h: T.Tensor, layer: int, cfg: GnnConfig, training: bool,
                    rng: Optional[np.random.Generator]) -> T.Tensor:
    if training and cfg.dropout > 0.0 and layer < cfg.layers - 1:
        return T.dropout(h, cfg.dropout, rng)
    return h


def readout(node_embeddings: T.Tensor) -> T.Tensor:
    """Mean-pool node embeddings into a graph embedding."""
    if node_embeddings.shape[0] == 0:
        raise DataError("readout: empty node embedding matrix")
    return T.tmean(node_embeddings, axis=0)


def embed_graph(model: GnnModel, g: LabeledGraph, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> T.Tensor:
    return readout(encode_nodes(model, g, training=training, rng=rng))


def classify(model: GnnModel, g: LabeledGraph, training: bool = False,
             rng: Optional[np.random.Generator] = None) -> T.Tensor:
    """Per-task logits h_G W + b."""
    if model.config.task_count < 1 or "head.w" not in model.params:
        raise DataError("model has no classification head")
    hg = embed_graph(model, g, training=training, rng=rng)
    return hg @ model.params["head.w"] + model.params["head.b"]


def with_head(model: GnnModel, task_count: int, seed: int) -> GnnModel:
    """Attach (or replace) a linear head, keeping encoder parameters shared."""
    if task_count < 1:
        raise DataError("task_count must be >= 1 for a classification head")
    rng = np.random.default_rng(seed)
    h = model.config.hidden_dim
    params = dict(model.params)
    params["head.w"] = T.Tensor(_glorot(rng, h, task_count, (h, task_count)),
                                requires_grad=True)
    params["head.b"] = T.Tensor(np.zeros(task_count), requires_grad=True)
    return GnnModel(config=replace(model.config, task_count=task_count), params=params)


def spectral_filter_response(arch: str, lam: float, alphas=None, eps: float = 0.3,
                             band: str = "low") -> float:
    """Scalar spectral kernel gain at eigenvalue ``lam`` (diagnostic).

    gcn: 1 - lam; chebnet: sum_k alphas[k] lam^k (monomial mode);
    fagcn: (eps+1) -/+ lam for the low/high band; fcn: constant 1.
    """
    if arch == "gcn":
        return 1.0 - lam
    if arch == "fcn":
        return 1.0
    if arch == "chebnet":
        if alphas is None:
            raise DataError("chebnet filter response needs alphas")
        return float(sum(a * lam ** k for k, a in enumerate(alphas)))
    if arch == "fagcn":
        if band == "low":
            return (eps + 1.0) - lam
        if band == "high":
            return (eps + 1.0) + lam
        raise DataError(f"unknown fagcn band {band!r}")
    raise DataError(f"no filter response for architecture {arch!r}")


MODEL_CHECKPOINT_VERSION = 1


def save_model(model: GnnModel, path) -> None:
    """Checkpoint: config header + named parameter tensors (JSON)."""
    payload = {
        "version": MODEL_CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "params": {
            name: {"shape": list(p.data.shape), "values": p.data.reshape(-1).tolist()}
            for name, p in model.params.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path) -> GnnModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != MODEL_CHECKPOINT_VERSION:
        raise DataError(f"model checkpoint version {payload.get('version')!r} unsupported")
    config = GnnConfig.from_dict(payload["config"])
    params = {}
    for name, entry in payload["params"].items():
        arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        params[name] = T.Tensor(arr, requires_grad=True)
    return GnnModel(config=config, params=params)
