"""Graph isomorphism network encoder over anonymized subgraphs.

Each layer updates every vertex with a 2-layer MLP applied to the sum of
its own representation and its neighbors' (sum aggregation, epsilon
fixed at 0). The graph representation is the mean over vertices of the
final layer, linearly projected and L2-normalized onto the unit sphere.

Batches of subgraphs are encoded in one pass over a block-diagonal
adjacency, which keeps all matrix work in a few large BLAS calls; the
per-subgraph results are identical to encoding them one at a time up to
floating-point reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .sampling import AugmentedSubgraph
from .spectral import vertex_features
from .streams import as_generator


@dataclass(frozen=True)
class GinConfig:
    num_layers: int = 5
    hidden_dim: int = 64
    out_dim: int = 64
    positional_dim: int = 32
    degree_buckets: int = 16
    dropout: float = 0.5

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if min(self.hidden_dim, self.out_dim, self.positional_dim, self.degree_buckets) < 1:
            raise ValueError("all dimensions must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def input_dim(self) -> int:
        return self.positional_dim + self.degree_buckets + 1


@dataclass
class GinParams:
    """Named parameter arrays plus the architecture they belong to."""

    config: GinConfig
    tensors: dict

    def copy(self) -> "GinParams":
        return GinParams(config=self.config,
                         tensors={k: v.copy() for k, v in self.tensors.items()})

    @property
    def names(self) -> list:
        return list(self.tensors.keys())


def init_params(cfg: GinConfig, rng) -> GinParams:
    """Xavier-uniform weights, zero biases, in a fixed name order."""
    gen = as_generator(rng)
    tensors = {}

    def xavier(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return gen.uniform(-bound, bound, size=(fan_in, fan_out))

    in_dim = cfg.input_dim
    for layer in range(cfg.num_layers):
        tensors[f"layers.{layer}.w1"] = xavier(in_dim, cfg.hidden_dim)
        tensors[f"layers.{layer}.b1"] = np.zeros((1, cfg.hidden_dim))
        tensors[f"layers.{layer}.w2"] = xavier(cfg.hidden_dim, cfg.hidden_dim)
        tensors[f"layers.{layer}.b2"] = np.zeros((1, cfg.hidden_dim))
        in_dim = cfg.hidden_dim
    tensors["proj.w"] = xavier(cfg.hidden_dim, cfg.out_dim)
    tensors["proj.b"] = np.zeros((1, cfg.out_dim))
    return GinParams(config=cfg, tensors=tensors)


def _batch_operators(subgraphs):
    """Block-diagonal (A + I) and the mean-readout matrix, as CSR."""
    counts = [s.graph.num_vertices for s in subgraphs]
    total = int(np.sum(counts))
    starts = np.concatenate([[0], np.cumsum(counts)])

    rows, cols = [], []
    for i, s in enumerate(subgraphs):
        g = s.graph
        base = starts[i]
        n = g.num_vertices
        src = np.repeat(np.arange(n, dtype=np.int64), g.degrees())
        rows.append(base + src)
        cols.append(base + g.neighbors)
        diag = base + np.arange(n, dtype=np.int64)
        rows.append(diag)
        cols.append(diag)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    agg = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(total, total))

    r_idx = np.repeat(np.arange(len(subgraphs), dtype=np.int64), counts)
    c_idx = np.arange(total, dtype=np.int64)
    vals = np.concatenate([np.full(n, 1.0 / n) for n in counts])
    readout = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(len(subgraphs), total))
    return agg, readout, starts


@dataclass
class EncodeResult:
    """Tape outputs of a batched encode call."""

    graph_reps: ad.Tensor   # B x out_dim, unit rows
    node_reps: ad.Tensor    # sum(n_i) x hidden_dim, final layer
    row_starts: np.ndarray  # subgraph i owns node rows [row_starts[i], row_starts[i+1])
    params: dict            # name -> Tensor (leaf parameters of the tape)


def encode_batch(params: GinParams, subgraphs, train: bool = False, rng=None,
                 trainable: bool = False) -> EncodeResult:
    """Encode a list of subgraphs in one tape."""
    if not subgraphs:
        raise ValueError("cannot encode an empty batch")
    cfg = params.config
    feats = [vertex_features(s, cfg.positional_dim, cfg.degree_buckets).matrix
             for s in subgraphs]
    x = np.concatenate(feats, axis=0)
    if x.shape[1] != cfg.input_dim:
        raise ValueError(f"feature width {x.shape[1]} != configured input_dim {cfg.input_dim}")
    agg, readout, starts = _batch_operators(subgraphs)

    gen = None
    if train and cfg.dropout > 0.0:
        if rng is None:
            raise ValueError("training-mode encode needs an rng for dropout")
        gen = as_generator(rng)

    wrap = ad.parameter if trainable else ad.constant
    leaves = {name: wrap(arr, name=name) for name, arr in params.tensors.items()}

    h = ad.constant(x)
    for layer in range(cfg.num_layers):
        h = ad.matmul_sparse(agg, h)
        h = ad.add(ad.matmul(h, leaves[f"layers.{layer}.w1"]), leaves[f"layers.{layer}.b1"])
        h = ad.relu(h)
        h = ad.add(ad.matmul(h, leaves[f"layers.{layer}.w2"]), leaves[f"layers.{layer}.b2"])
    pooled = ad.matmul_sparse(readout, h)
    # regularize the pooled representation once rather than inside every
    # layer MLP; stacking five masks makes the two views of a positive
    # pair nearly independent and stalls contrastive training
    pooled = ad.dropout(pooled, cfg.dropout, train=train and cfg.dropout > 0.0, rng=gen)
    projected = ad.add(ad.matmul(pooled, leaves["proj.w"]), leaves["proj.b"])
    reps = ad.l2_normalize_rows(projected)
    return EncodeResult(graph_reps=reps, node_reps=h, row_starts=starts, params=leaves)


def encode(params: GinParams, s: AugmentedSubgraph, train: bool = False, rng=None):
    """Encode one subgraph; returns (node_reps n x hidden, graph_rep (out_dim,))."""
    res = encode_batch(params, [s], train=train, rng=rng)
    return res.node_reps.values.copy(), res.graph_reps.values[0].copy()


def encode_with_grads(params: GinParams, s: AugmentedSubgraph, target_grad_on_output,
                      train: bool = False, rng=None) -> dict:
    """Parameter gradients of target_grad_on_output . graph_rep.

    target_grad_on_output is the cotangent on the graph representation
    (shape (out_dim,) or (1, out_dim)).
    """
    res = encode_batch(params, [s], train=train, rng=rng, trainable=True)
    seed = np.asarray(target_grad_on_output, dtype=np.float64).reshape(1, -1)
    ad.backward(res.graph_reps, seed)
    return {name: (t.grad if t.grad is not None else np.zeros_like(t.values))
            for name, t in res.params.items()}


def batch_grads(result: EncodeResult, upstream: np.ndarray) -> dict:
    """Backward pass of a batched encode; upstream is B x out_dim."""
    ad.backward(result.graph_reps, np.asarray(upstream, dtype=np.float64))
    return {name: (t.grad if t.grad is not None else np.zeros_like(t.values))
            for name, t in result.params.items()}
