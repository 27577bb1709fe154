"""Subgraph instance sampling for contrastive pre-training.

An *instance* is an ego vertex in some corpus graph. A *view* of that
instance is produced by a random walk with restart rooted at the ego,
inducing the subgraph on the visited set, and anonymizing it: the ego
becomes local vertex 0 and the remaining visited vertices get local ids
1..k-1 in ascending original-id order, erasing global identity while
keeping the ego distinguished.

Two independent views of the same ego form a positive pair; views of
other egos act as negatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graphs import Graph, Subgraph, from_edge_array, induced_subgraph
from .streams import RandomStreams, as_generator


@dataclass(frozen=True)
class RwrConfig:
    """Random-walk-with-restart augmentation parameters.

    step_budget defaults to 4x max_set_size, enough for the walk to
    saturate its vertex budget with high probability at restart_prob 0.8.
    """

    restart_prob: float = 0.8
    max_set_size: int = 128
    step_budget: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.restart_prob <= 1.0:
            raise ValueError(f"restart_prob must be in [0, 1], got {self.restart_prob}")
        if self.max_set_size < 1:
            raise ValueError(f"max_set_size must be >= 1, got {self.max_set_size}")
        if self.step_budget is None:
            object.__setattr__(self, "step_budget", 4 * self.max_set_size)
        if self.step_budget < 0:
            raise ValueError(f"step_budget must be >= 0, got {self.step_budget}")


@dataclass(frozen=True)
class AugmentedSubgraph:
    """An anonymized subgraph view of one instance.

    ego is always local vertex 0. source records provenance as
    (corpus graph index, original ego vertex id).
    """

    graph: Graph
    ego: int = 0
    source: tuple = (-1, -1)


@dataclass(frozen=True)
class ContrastBatch:
    """Paired query/key views: queries[i] and positive_keys[i] share an ego."""

    queries: list
    positive_keys: list

    def __post_init__(self):
        if len(self.queries) != len(self.positive_keys):
            raise ValueError("queries and positive_keys must have equal length")
        for q, k in zip(self.queries, self.positive_keys):
            if q.source != k.source:
                raise ValueError(f"query/key provenance mismatch: {q.source} vs {k.source}")

    def __len__(self) -> int:
        return len(self.queries)


def rwr_visit_set(g: Graph, v: int, cfg: RwrConfig, rng) -> np.ndarray:
    """Visited vertex set of a restart walk rooted at v (always contains v).

    The walk runs on the full graph. Each step restarts to v with
    probability restart_prob (an isolated current vertex forces restart),
    otherwise moves to a uniformly random neighbor. It stops once the set
    holds max_set_size vertices or the step budget is spent. Output is
    sorted ascending.
    """
    if not 0 <= v < g.num_vertices:
        raise ValueError(f"walk root {v} out of range")
    gen = as_generator(rng)
    coins = gen.random(cfg.step_budget)
    moves = gen.random(cfg.step_budget)
    visited = _kernels.rwr_walk(g.offsets, g.neighbors, v, cfg.restart_prob,
                                cfg.max_set_size, coins, moves)
    return np.sort(visited)


def anonymize(sub: Subgraph, ego_original: int, source: tuple = (-1, -1)) -> AugmentedSubgraph:
    """Relabel a subgraph so the ego is 0 and the rest follow in ascending
    original-id order."""
    where = np.nonzero(sub.origin == ego_original)[0]
    if len(where) == 0:
        raise ValueError(f"ego vertex {ego_original} is not in the subgraph")
    ego_local = int(where[0])
    k = sub.graph.num_vertices
    # old local id -> new local id; origins are already ascending
    new_id = np.empty(k, dtype=np.int64)
    new_id[ego_local] = 0
    others = np.delete(np.arange(k), ego_local)
    new_id[others] = np.arange(1, k, dtype=np.int64)
    edges = sub.graph.edge_array()
    relabeled = new_id[edges] if len(edges) else edges
    return AugmentedSubgraph(graph=from_edge_array(relabeled, num_vertices=k),
                             ego=0, source=source)


def augment(g: Graph, v: int, cfg: RwrConfig, rng, graph_index: int = -1) -> AugmentedSubgraph:
    """One stochastic anonymized view of instance (g, v)."""
    visited = rwr_visit_set(g, v, cfg, rng)
    return anonymize(induced_subgraph(g, visited), v, source=(graph_index, v))


def make_batch(corpus: list, batch_size: int, cfg: RwrConfig, rng) -> ContrastBatch:
    """Sample batch_size instances and two independent views of each.

    Instances are drawn by picking a corpus graph with probability
    proportional to its vertex count, then a vertex uniformly inside it.
    ``rng`` must be a RandomStreams node: each slot and each side draws
    from its own derived sub-stream, so assembly order cannot change the
    result.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not isinstance(rng, RandomStreams):
        raise TypeError("make_batch needs a RandomStreams node for per-slot derivation")
    sizes = np.array([g.num_vertices for g in corpus], dtype=np.float64)
    weights = sizes / sizes.sum()
    queries, keys = [], []
    for slot in range(batch_size):
        slot_stream = rng.child(slot)
        pick = slot_stream.child("pick").generator()
        gi = int(pick.choice(len(corpus), p=weights))
        v = int(pick.integers(0, corpus[gi].num_vertices))
        queries.append(augment(corpus[gi], v, cfg, slot_stream.child("q"), graph_index=gi))
        keys.append(augment(corpus[gi], v, cfg, slot_stream.child("k"), graph_index=gi))
    return ContrastBatch(queries=queries, positive_keys=keys)
