"""Synthetic graph families for desk-scale training and evaluation.

The pre-training corpus mixes cycles, stars, barbells, and 2-D grids with
pairwise-distinct sizes, so most ego vertices are structurally
distinguishable and instance discrimination has learnable signal.
Held-out datasets reuse the families at sizes absent from the corpus.
"""

from __future__ import annotations

import numpy as np

from .graphs import Graph, from_edge_array
from .streams import RandomStreams


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    idx = np.arange(n, dtype=np.int64)
    edges = np.stack([idx, (idx + 1) % n], axis=1)
    return from_edge_array(edges, num_vertices=n)


def star_graph(leaves: int) -> Graph:
    """Vertex 0 is the hub; 1..leaves are its leaves."""
    if leaves < 2:
        raise ValueError("a star needs at least 2 leaves")
    idx = np.arange(1, leaves + 1, dtype=np.int64)
    edges = np.stack([np.zeros(leaves, dtype=np.int64), idx], axis=1)
    return from_edge_array(edges, num_vertices=leaves + 1)


def barbell_graph(clique: int, bridge: int) -> Graph:
    """Two cliques of size ``clique`` joined by a path of ``bridge``
    intermediate vertices."""
    if clique < 3:
        raise ValueError("barbell cliques need at least 3 vertices")
    if bridge < 1:
        raise ValueError("barbell bridge needs at least 1 vertex")
    edges = []
    for a in range(clique):
        for b in range(a + 1, clique):
            edges.append((a, b))
    second = clique + bridge
    for a in range(clique):
        for b in range(a + 1, clique):
            edges.append((second + a, second + b))
    chain = [clique - 1] + [clique + i for i in range(bridge)] + [second]
    for a, b in zip(chain[:-1], chain[1:]):
        edges.append((a, b))
    return from_edge_array(np.array(edges, dtype=np.int64), num_vertices=2 * clique + bridge)


def grid_graph(rows: int, cols: int) -> Graph:
    if rows < 2 or cols < 2:
        raise ValueError("a grid needs at least 2 rows and 2 columns")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return from_edge_array(np.array(edges, dtype=np.int64), num_vertices=rows * cols)


def disjoint_union(graphs) -> Graph:
    """One graph holding every input as a separate component."""
    edges = []
    offset = 0
    total = 0
    for g in graphs:
        e = g.edge_array()
        if len(e):
            edges.append(e + offset)
        offset += g.num_vertices
        total += g.num_vertices
    return from_edge_array(np.concatenate(edges), num_vertices=total)


def desk_corpus() -> list:
    """Deterministic mixed-family corpus for desk-scale pre-training.

    Restart walks only see a few hops, so the mix leans on many small
    graphs of pairwise-distinct shape; no single local vertex class
    (cycle interior, clique interior, grid interior, ...) holds more than
    a few percent of the vertices, keeping instance discrimination
    mostly learnable.
    """
    graphs = [cycle_graph(10), cycle_graph(11)]
    for leaves in (4, 6, 8, 10):
        graphs.append(star_graph(leaves))
    for clique in (4, 5, 6, 7, 8, 9, 10):
        graphs.append(barbell_graph(clique, 1))
    for rows, cols in [(2, 3), (2, 4), (2, 5), (3, 3), (3, 4)]:
        graphs.append(grid_graph(rows, cols))
    return graphs


def roles_dataset(seed: int = 0):
    """Held-out structural-role labels: one graph of fresh cycles and
    stars, labels 0 = cycle member, 1 = star hub, 2 = star leaf.

    Returns (Graph, labels ndarray). Sizes are drawn per seed from ranges
    disjoint from desk_corpus sizes (cycles of 12+ vertices, star leaf
    counts outside {4, 6, 8, 10}); sizes repeat so every class has enough
    examples for the fold split.
    """
    gen = RandomStreams(seed, "roles").generator()
    star_sizes = np.array([5, 7, 9] + list(range(11, 22)), dtype=np.int64)
    cycles = [cycle_graph(int(n)) for n in gen.choice(np.arange(12, 31), size=20)]
    stars = [star_graph(int(v)) for v in gen.choice(star_sizes, size=32)]
    labels = []
    for g in cycles:
        labels.extend([0] * g.num_vertices)
    for g in stars:
        labels.append(1)
        labels.extend([2] * (g.num_vertices - 1))
    graph = disjoint_union(cycles + stars)
    return graph, np.array(labels, dtype=np.int64)


def two_family_dataset(per_class: int = 100, seed: int = 0):
    """Graph classification set: class 0 cycles vs class 1 stars, sizes
    randomized per seed. Returns (list of Graph, labels ndarray)."""
    gen = RandomStreams(seed, "two-family").generator()
    graphs, labels = [], []
    for _ in range(per_class):
        graphs.append(cycle_graph(int(gen.integers(10, 31))))
        labels.append(0)
    for _ in range(per_class):
        graphs.append(star_graph(int(gen.integers(5, 21))))
        labels.append(1)
    return graphs, np.array(labels, dtype=np.int64)
