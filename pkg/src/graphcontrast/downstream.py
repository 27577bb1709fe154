"""Transfer harnesses: embeddings, classification probes, similarity search.

Freeze mode treats the pre-trained encoder as a fixed feature extractor
and trains a multinomial logistic regression on top; it never mutates the
encoder. Full mode fine-tunes encoder and head jointly per fold, starting
every fold from the original checkpoint.

Vertex embeddings use one deterministic augmentation per vertex (the
walk stream is derived from the embedding seed and the vertex id), so
repeated calls on the same inputs are identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoder import batch_grads, encode_batch
from .graphs import Graph, GraphDataError, from_edge_array, induced_subgraph
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .sampling import RwrConfig, anonymize, augment
from .streams import RandomStreams
from .training import Checkpoint, params_from_checkpoint

GRAPH_EMBED_CAP = 512


@dataclass(frozen=True)
class LabeledNodes:
    """Vertices of one graph with integer class labels."""

    graph: Graph
    vertices: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.vertices) != len(self.labels):
            raise ValueError("vertices and labels must align")
        if len(self.vertices) == 0:
            raise ValueError("no labeled vertices")


@dataclass(frozen=True)
class GraphDataset:
    """Whole graphs with integer class labels."""

    graphs: list
    labels: np.ndarray

    def __post_init__(self):
        if len(self.graphs) != len(self.labels):
            raise ValueError("graphs and labels must align")
        if len(self.graphs) == 0:
            raise ValueError("no graphs")


@dataclass
class LinearHead:
    """Multinomial logistic regression weights."""

    w: np.ndarray  # d x C
    b: np.ndarray  # 1 x C

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w + self.b

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)


def _softmax_ce(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    n = len(labels)
    nll = -(shifted[np.arange(n), labels] - np.log(expz.sum(axis=1)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return float(nll.mean()), dlogits / n


def logreg_fit(features: np.ndarray, labels: np.ndarray, num_classes: int | None = None,
               l2_penalty: float = 1e-3, epochs: int = 500, lr: float = 1.0) -> LinearHead:
    """Full-batch gradient descent on cross-entropy + (l2/2)||W||^2.

    The penalty applies to the weight matrix only, not the bias. The fit
    is deterministic: zero initialization and a fixed epoch count.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("features must be 2-D and aligned with labels")
    if l2_penalty < 0:
        raise ValueError("l2_penalty must be non-negative")
    c = int(num_classes if num_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= c:
        raise ValueError("labels out of range")
    head = LinearHead(w=np.zeros((x.shape[1], c)), b=np.zeros((1, c)))
    for _ in range(epochs):
        _, dlogits = _softmax_ce(head.logits(x), y)
        head.w -= lr * (x.T @ dlogits + l2_penalty * head.w)
        head.b -= lr * dlogits.sum(axis=0, keepdims=True)
    return head


def stratified_folds(labels: np.ndarray, folds: int, seed: int = 0) -> list:
    """Index partitions whose sizes differ by at most one, with each
    class spread as evenly as the fold count allows."""
    y = np.asarray(labels)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > len(y):
        raise ValueError(f"cannot split {len(y)} samples into {folds} folds")
    gen = RandomStreams(seed, "folds").generator()
    runs = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        runs.append(gen.permutation(idx))
    dealt = np.concatenate(runs)
    return [dealt[f::folds] for f in range(folds)]


def embed_nodes(ckpt: Checkpoint, g: Graph, vertices=None, cfg: RwrConfig | None = None) -> np.ndarray:
    """One unit-norm embedding row per requested vertex.

    Each vertex gets a single augmentation drawn from a stream derived
    from (cfg.seed, vertex id), making the output a pure function of
    (checkpoint, graph, vertices, cfg).
    """
    if vertices is None:
        vertices = np.arange(g.num_vertices, dtype=np.int64)
    vertices = np.asarray(vertices, dtype=np.int64)
    if len(vertices) == 0:
        raise ValueError("no vertices to embed")
    if vertices.min() < 0 or vertices.max() >= g.num_vertices:
        raise ValueError("vertex id out of range")
    cfg = cfg if cfg is not None else ckpt.config.rwr
    params = params_from_checkpoint(ckpt, "q")
    root = RandomStreams(cfg.seed, "embed")
    out = np.empty((len(vertices), ckpt.config.gin.out_dim))
    chunk = 512
    for base in range(0, len(vertices), chunk):
        vs = vertices[base:base + chunk]
        subs = [augment(g, int(v), cfg, root.child(int(v))) for v in vs]
        out[base:base + len(vs)] = encode_batch(params, subs, train=False).graph_reps.values
    return out


def whole_graph_view(g: Graph):
    """The entire graph as an anonymized instance with ego at vertex 0."""
    if g.num_vertices > GRAPH_EMBED_CAP:
        raise ValueError(
            f"graph with {g.num_vertices} vertices exceeds the whole-graph cap of {GRAPH_EMBED_CAP}")
    return anonymize(induced_subgraph(g, np.arange(g.num_vertices)), 0, source=(-1, 0))


def embed_graph(ckpt: Checkpoint, g: Graph) -> np.ndarray:
    """Unit-norm embedding of a whole graph (ego fixed at vertex 0)."""
    params = params_from_checkpoint(ckpt, "q")
    return encode_batch(params, [whole_graph_view(g)], train=False).graph_reps.values[0].copy()


def _finetune_fold(ckpt: Checkpoint, instances, labels, num_classes: int, train_idx,
                   seed: int, fold: int, epochs: int, batch_size: int, peak_lr: float,
                   rebuild):
    """Fine-tune encoder + linear head on one fold's training instances.

    instances: list of per-index instance descriptors; rebuild(idx, stream)
    returns a fresh AugmentedSubgraph view for training (stochastic per
    epoch) while eval uses the deterministic views in ``instances``.
    """
    if epochs < 4:
        raise ValueError("full fine-tuning needs at least 4 epochs (3 are warmup)")
    params = params_from_checkpoint(ckpt, "q")
    head = LinearHead(w=np.zeros((ckpt.config.gin.out_dim, num_classes)),
                      b=np.zeros((1, num_classes)))
    all_params = dict(params.tensors)
    all_params["head.w"] = head.w
    all_params["head.b"] = head.b
    state = AdamState.init_like(all_params)
    steps_per_epoch = max(1, math.ceil(len(train_idx) / batch_size))
    schedule = LrSchedule(peak_lr, 3 * steps_per_epoch, epochs * steps_per_epoch)
    root = RandomStreams(seed, "finetune", fold)
    gstep = 0
    for epoch in range(epochs):
        order = root.child("order", epoch).generator().permutation(train_idx)
        for start in range(0, len(order), batch_size):
            batch_idx = order[start:start + batch_size]
            views = [rebuild(int(i), root.child("aug", epoch, int(i))) for i in batch_idx]
            res = encode_batch(params, views, train=True,
                               rng=root.child("dropout", epoch, gstep), trainable=True)
            reps = res.graph_reps.values
            logits = reps @ head.w + head.b
            _, dlogits = _softmax_ce(logits, labels[batch_idx])
            grads = batch_grads(res, dlogits @ head.w.T)
            grads["head.w"] = reps.T @ dlogits
            grads["head.b"] = dlogits.sum(axis=0, keepdims=True)
            adam_step(all_params, grads, state, lr_at(schedule, gstep))
            gstep += 1
    return params, head


def _classify(ckpt: Checkpoint, instances, labels: np.ndarray, mode: str, folds: int,
              seed: int, epochs: int, batch_size: int, peak_lr: float, rebuild,
              l2_penalty: float):
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = int(labels.max()) + 1
    if num_classes < 2:
        raise ValueError("classification needs at least 2 classes")
    if mode not in ("freeze", "full"):
        raise ValueError(f"mode must be 'freeze' or 'full', got {mode!r}")
    parts = stratified_folds(labels, folds, seed)
    params = params_from_checkpoint(ckpt, "q")
    accuracies = []

    if mode == "freeze":
        feats = np.empty((len(instances), ckpt.config.gin.out_dim))
        chunk = 512
        for base in range(0, len(instances), chunk):
            feats[base:base + chunk] = encode_batch(
                params, instances[base:base + chunk], train=False).graph_reps.values
        for f, test_idx in enumerate(parts):
            train_idx = np.concatenate([p for j, p in enumerate(parts) if j != f])
            head = logreg_fit(feats[train_idx], labels[train_idx],
                              num_classes=num_classes, l2_penalty=l2_penalty)
            pred = head.predict(feats[test_idx])
            accuracies.append(float(np.mean(pred == labels[test_idx])))
    else:
        for f, test_idx in enumerate(parts):
            train_idx = np.concatenate([p for j, p in enumerate(parts) if j != f])
            tuned, head = _finetune_fold(ckpt, instances, labels, num_classes, train_idx,
                                         seed, f, epochs, batch_size, peak_lr, rebuild)
            test_views = [instances[int(i)] for i in test_idx]
            reps = encode_batch(tuned, test_views, train=False).graph_reps.values
            pred = head.predict(reps)
            accuracies.append(float(np.mean(pred == labels[test_idx])))
    return float(np.mean(accuracies)), accuracies


def node_classify(ckpt: Checkpoint, data: LabeledNodes, mode: str = "freeze",
                  folds: int = 10, seed: int = 0, cfg: RwrConfig | None = None,
                  epochs: int = 10, batch_size: int = 32, peak_lr: float = 0.005,
                  l2_penalty: float = 1e-3):
    """K-fold vertex classification. Returns (mean accuracy, per-fold list)."""
    rwr = cfg if cfg is not None else ckpt.config.rwr
    root = RandomStreams(rwr.seed, "embed")
    instances = [augment(data.graph, int(v), rwr, root.child(int(v)))
                 for v in data.vertices]

    def rebuild(i, stream):
        return augment(data.graph, int(data.vertices[i]), rwr, stream)

    return _classify(ckpt, instances, data.labels, mode, folds, seed,
                     epochs, batch_size, peak_lr, rebuild, l2_penalty)


def graph_classify(ckpt: Checkpoint, data: GraphDataset, mode: str = "freeze",
                   folds: int = 10, seed: int = 0, epochs: int = 10,
                   batch_size: int = 32, peak_lr: float = 0.005,
                   l2_penalty: float = 1e-3):
    """K-fold whole-graph classification. Returns (mean accuracy, per-fold list)."""
    instances = [whole_graph_view(g) for g in data.graphs]

    def rebuild(i, stream):
        return instances[i]  # whole-graph views are deterministic

    return _classify(ckpt, instances, data.labels, mode, folds, seed,
                     epochs, batch_size, peak_lr, rebuild, l2_penalty)


def hits_at_k(query_emb: np.ndarray, cand_emb: np.ndarray, truth, k: int) -> float:
    """Fraction of truth pairs (u, v) where v is within the top-k
    candidates by inner product with u's embedding. Ties rank by
    ascending candidate id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = list(truth)
    if not truth:
        raise ValueError("truth set is empty")
    hits = 0
    ids = np.arange(len(cand_emb))
    for u, v in truth:
        scores = cand_emb @ query_emb[u]
        order = np.lexsort((ids, -scores))
        hits += int(v in order[:k])
    return hits / len(truth)


def top_k_similarity(ckpt: Checkpoint, g1: Graph, g2: Graph, truth, k: int = 10,
                     cfg: RwrConfig | None = None) -> float:
    """HITS@k for matching g1's vertices to g2's by embedding similarity."""
    truth = list(truth)
    if not truth:
        raise ValueError("truth set is empty")
    for u, v in truth:
        if not 0 <= u < g1.num_vertices:
            raise ValueError(f"truth query vertex {u} out of range")
        if not 0 <= v < g2.num_vertices:
            raise ValueError(f"truth candidate vertex {v} out of range")
    emb1 = embed_nodes(ckpt, g1, cfg=cfg)
    emb2 = embed_nodes(ckpt, g2, cfg=cfg)
    return hits_at_k(emb1, emb2, truth, k)


def load_labels(path, graph: Graph) -> LabeledNodes:
    """Read '<vertex> <class>' lines into a LabeledNodes over ``graph``."""
    vertices, labels = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise GraphDataError(f"{path}: line {lineno}: expected '<vertex> <class>'")
            try:
                v, c = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphDataError(f"{path}: line {lineno}: non-integer field") from None
            if not 0 <= v < graph.num_vertices:
                raise GraphDataError(f"{path}: line {lineno}: vertex {v} not in graph")
            if c < 0:
                raise GraphDataError(f"{path}: line {lineno}: negative class id")
            vertices.append(v)
            labels.append(c)
    if not vertices:
        raise GraphDataError(f"{path}: no labels found")
    return LabeledNodes(graph=graph, vertices=np.array(vertices, dtype=np.int64),
                        labels=np.array(labels, dtype=np.int64))


def load_truth(path) -> list:
    """Read '<u> <v>' vertex pairs."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise GraphDataError(f"{path}: line {lineno}: expected '<u> <v>'")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise GraphDataError(f"{path}: line {lineno}: non-integer vertex id") from None
    return pairs


def save_graph_set(path, graphs, labels) -> None:
    """Write a graph-set file: 'g <id> <class> <n> <m>' headers followed
    by m edge lines with graph-local vertex ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, (g, label) in enumerate(zip(graphs, labels)):
            edges = g.edge_array()
            fh.write(f"g {i} {int(label)} {g.num_vertices} {len(edges)}\n")
            for u, v in edges.tolist():
                fh.write(f"{u} {v}\n")


def load_graph_set(path) -> GraphDataset:
    """Read the graph-set format written by save_graph_set."""
    graphs, labels = [], []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [(no, ln.split("#", 1)[0].strip()) for no, ln in enumerate(fh, start=1)]
    lines = [(no, ln) for no, ln in lines if ln]
    pos = 0
    while pos < len(lines):
        no, header = lines[pos]
        parts = header.split()
        if len(parts) != 5 or parts[0] != "g":
            raise GraphDataError(f"{path}: line {no}: expected 'g <id> <class> <n> <m>' header")
        try:
            _, label, n, m = (int(x) for x in parts[1:])
        except ValueError:
            raise GraphDataError(f"{path}: line {no}: non-integer header field") from None
        if n < 1 or m < 0:
            raise GraphDataError(f"{path}: line {no}: invalid graph dimensions")
        if pos + 1 + m > len(lines):
            raise GraphDataError(f"{path}: line {no}: truncated record, expected {m} edge lines")
        edges = []
        for no2, text in lines[pos + 1:pos + 1 + m]:
            ep = text.split()
            if len(ep) != 2:
                raise GraphDataError(f"{path}: line {no2}: expected '<u> <v>' edge line")
            try:
                u, v = int(ep[0]), int(ep[1])
            except ValueError:
                raise GraphDataError(f"{path}: line {no2}: non-integer vertex id") from None
            if not (0 <= u < n and 0 <= v < n):
                raise GraphDataError(f"{path}: line {no2}: edge endpoint outside 0..{n - 1}")
            edges.append((u, v))
        graphs.append(from_edge_array(np.array(edges, dtype=np.int64).reshape(-1, 2),
                                      num_vertices=n))
        labels.append(label)
        pos += 1 + m
    if not graphs:
        raise GraphDataError(f"{path}: no graph records found")
    return GraphDataset(graphs=graphs, labels=np.array(labels, dtype=np.int64))
