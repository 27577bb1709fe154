"""Immutable undirected graphs in compressed adjacency form.

Vertices are ``0..n-1``. Storage is CSR-like: an ``offsets`` array of
length ``n+1`` and a flat ``neighbors`` array holding each vertex's
adjacency list in ascending order. Graphs are simple: no self-loops, no
duplicate edges, and every edge is stored in both directions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class GraphDataError(ValueError):
    """Malformed graph input (files or edge arrays)."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph over vertices ``0..num_vertices-1``."""

    offsets: np.ndarray
    neighbors: np.ndarray

    def __post_init__(self):
        self.offsets.setflags(write=False)
        self.neighbors.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return len(self.offsets) - 1

    @property
    def num_edges(self) -> int:
        return len(self.neighbors) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def neighbors_of(self, v: int) -> np.ndarray:
        if not 0 <= v < self.num_vertices:
            raise IndexError(f"vertex {v} out of range for graph with {self.num_vertices} vertices")
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors_of(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def edge_array(self) -> np.ndarray:
        """Each undirected edge once, as an (m, 2) array with u < v."""
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int64), self.degrees())
        mask = src < self.neighbors
        return np.stack([src[mask], self.neighbors[mask]], axis=1)

    def validate(self) -> None:
        n = self.num_vertices
        if self.offsets.dtype != np.int64 or self.neighbors.dtype != np.int64:
            raise GraphDataError("offsets/neighbors must be int64")
        if n < 1:
            raise GraphDataError("graph must have at least one vertex")
        if self.offsets[0] != 0 or self.offsets[-1] != len(self.neighbors):
            raise GraphDataError("offsets must start at 0 and end at len(neighbors)")
        if np.any(np.diff(self.offsets) < 0):
            raise GraphDataError("offsets must be non-decreasing")
        if len(self.neighbors) and (self.neighbors.min() < 0 or self.neighbors.max() >= n):
            raise GraphDataError("neighbor ids out of range")
        for v in range(n):
            row = self.neighbors_of(v)
            if np.any(np.diff(row) <= 0):
                raise GraphDataError(f"adjacency list of vertex {v} not strictly ascending")
            if np.any(row == v):
                raise GraphDataError(f"self-loop at vertex {v}")
            for u in row.tolist():
                if not self.has_edge(u, v):
                    raise GraphDataError(f"edge {v}-{u} missing its reverse direction")


def from_edge_array(edges: np.ndarray, num_vertices: int | None = None) -> Graph:
    """Build a Graph from an (m, 2) integer array of endpoint pairs.

    Self-loops are dropped and duplicate edges collapsed. ``num_vertices``
    defaults to ``max id + 1``; ids beyond the edge list become isolated
    vertices.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) and edges.min() < 0:
        raise GraphDataError("vertex ids must be non-negative")
    edges = edges[edges[:, 0] != edges[:, 1]]
    if num_vertices is None:
        if len(edges) == 0:
            raise GraphDataError("edge list contains no usable edges")
        num_vertices = int(edges.max()) + 1
    elif len(edges) and edges.max() >= num_vertices:
        raise GraphDataError(f"edge endpoint {int(edges.max())} exceeds num_vertices={num_vertices}")

    if len(edges):
        both = np.concatenate([edges, edges[:, ::-1]])
        both = np.unique(both, axis=0)
    else:
        both = np.empty((0, 2), dtype=np.int64)
    counts = np.bincount(both[:, 0], minlength=num_vertices)
    offsets = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return Graph(offsets=offsets, neighbors=both[:, 1].copy())


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list file.

    One ``u v`` pair per line; blank lines and ``#`` comments are ignored.
    Malformed lines raise GraphDataError naming the line number.
    """
    pairs = []
    raw_count = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise GraphDataError(f"{path}: line {lineno}: expected two vertex ids, got {text!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphDataError(f"{path}: line {lineno}: non-integer vertex id in {text!r}") from None
            if u < 0 or v < 0:
                raise GraphDataError(f"{path}: line {lineno}: negative vertex id in {text!r}")
            raw_count += 1
            pairs.append((u, v))
    if not pairs:
        raise GraphDataError(f"{path}: no edges found")
    g = from_edge_array(np.array(pairs, dtype=np.int64))
    if g.num_edges == 0:
        raise GraphDataError(f"{path}: no edges left after dropping self-loops")
    log.info("loaded %s: %d vertices, %d edges (%d input lines, %d dropped as loops/duplicates)",
             path, g.num_vertices, g.num_edges, raw_count, raw_count - g.num_edges)
    return g


@dataclass(frozen=True)
class Subgraph:
    """A vertex-induced subgraph plus the map from local ids back to originals."""

    graph: Graph
    origin: np.ndarray  # origin[i] = original id of local vertex i, strictly ascending

    def __post_init__(self):
        self.origin.setflags(write=False)


def induced_subgraph(g: Graph, vertices) -> Subgraph:
    """Induce on a set of original vertex ids (any order, deduplicated)."""
    vs = np.unique(np.asarray(vertices, dtype=np.int64))
    if len(vs) == 0:
        raise GraphDataError("cannot induce on an empty vertex set")
    if vs[0] < 0 or vs[-1] >= g.num_vertices:
        raise GraphDataError("induced vertex set contains out-of-range ids")

    local_edges = []
    for local, orig in enumerate(vs.tolist()):
        row = g.neighbors_of(orig)
        kept = row[np.isin(row, vs, assume_unique=False)]
        if len(kept):
            locals_of_kept = np.searchsorted(vs, kept)
            mask = locals_of_kept > local  # each edge once
            for other in locals_of_kept[mask].tolist():
                local_edges.append((local, other))
    if local_edges:
        sub = from_edge_array(np.array(local_edges, dtype=np.int64), num_vertices=len(vs))
    else:
        sub = from_edge_array(np.empty((0, 2), dtype=np.int64), num_vertices=len(vs))
    return Subgraph(graph=sub, origin=vs)


def r_ego_network(g: Graph, v: int, r: int) -> Subgraph:
    """Induced subgraph on all vertices within hop distance r of v."""
    if not 0 <= v < g.num_vertices:
        raise GraphDataError(f"ego vertex {v} out of range")
    if r < 0:
        raise GraphDataError("radius must be non-negative")
    seen = np.zeros(g.num_vertices, dtype=bool)
    seen[v] = True
    frontier = np.array([v], dtype=np.int64)
    for _ in range(r):
        if len(frontier) == 0:
            break
        nxt = []
        for u in frontier.tolist():
            row = g.neighbors_of(u)
            fresh = row[~seen[row]]
            if len(fresh):
                seen[fresh] = True
                nxt.append(fresh)
        frontier = np.concatenate(nxt) if nxt else np.empty(0, dtype=np.int64)
    return induced_subgraph(g, np.nonzero(seen)[0])
