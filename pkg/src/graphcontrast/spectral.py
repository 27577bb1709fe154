"""Spectral vertex features for anonymized subgraphs.

Each subgraph vertex gets the concatenation of

* a generalized positional embedding: its entries in the eigenvectors
  belonging to the smallest eigenvalues of the symmetric normalized
  Laplacian (zero-padded when the subgraph has fewer vertices than the
  requested dimension),
* a clamped one-hot degree encoding,
* a 0/1 ego indicator.

Eigendecomposition is a cyclic Jacobi iteration; for the tiny dense
matrices that subgraphs produce it is exact to near machine precision and
has no cross-platform library variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .sampling import AugmentedSubgraph

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50
SIGN_TOL = 1e-8


class EigenDecomposition(NamedTuple):
    values: np.ndarray   # ascending
    vectors: np.ndarray  # column i pairs with values[i]


class EigenConvergenceError(ArithmeticError):
    """Jacobi iteration failed to reach the off-diagonal tolerance."""


def normalized_laplacian(s: AugmentedSubgraph) -> np.ndarray:
    """Dense symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}.

    Rows and columns of isolated vertices are identically zero.
    """
    g = s.graph
    n = g.num_vertices
    deg = g.degrees().astype(np.float64)
    lap = np.zeros((n, n))
    inv_sqrt = np.zeros(n)
    nonzero = deg > 0
    inv_sqrt[nonzero] = 1.0 / np.sqrt(deg[nonzero])
    for v in range(n):
        row = g.neighbors_of(v)
        if len(row):
            lap[v, row] = -inv_sqrt[v] * inv_sqrt[row]
            lap[v, v] = 1.0
    return lap


def symmetric_eig(matrix: np.ndarray, tol: float = JACOBI_TOL,
                  max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Rotations sweep all off-diagonal pairs until the off-diagonal
    Frobenius norm drops below ``tol``. Eigenvalues are returned in
    ascending order with eigenvector columns aligned.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > 1e-12:
        raise ValueError("matrix is not symmetric within 1e-12")
    vals, vecs, sweeps = _kernels.jacobi_sweeps(a.copy(), max_sweeps, tol)
    if sweeps < 0:
        raise EigenConvergenceError(
            f"Jacobi failed to converge below {tol} within {max_sweeps} sweeps (n={a.shape[0]})")
    order = np.argsort(vals, kind="stable")
    return EigenDecomposition(values=vals[order], vectors=vecs[:, order])


def _bfs_distances(g, start: int) -> np.ndarray:
    """Hop distances from ``start``; unreachable vertices get ``n``."""
    n = g.num_vertices
    dist = np.full(n, n, dtype=np.int64)
    dist[start] = 0
    frontier = [start]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for w in g.neighbors_of(u).tolist():
                if dist[w] > d:
                    dist[w] = d
                    nxt.append(w)
        frontier = nxt
    return dist


def _sign_groups(s: AugmentedSubgraph) -> list[np.ndarray]:
    """Vertex groups in a labeling-independent scan order.

    Vertices are bucketed by (hop distance from the ego, degree). Both
    keys are properties of the rooted subgraph itself, not of how its
    vertices happen to be numbered, so any two labelings of the same
    subgraph produce the same group sequence up to within-group order.
    """
    g = s.graph
    dist = _bfs_distances(g, s.ego)
    deg = g.degrees()
    order = np.lexsort((deg, dist))
    keys = np.stack([dist[order], deg[order]], axis=1)
    cuts = np.flatnonzero(np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
    return np.split(order, cuts)


def _fix_signs(vectors: np.ndarray, groups: list[np.ndarray]) -> np.ndarray:
    """Flip each column to a labeling-independent orientation.

    An eigenvector's overall sign is arbitrary, so it must be pinned by
    quantities that survive renumbering the vertices; otherwise two
    labelings of the same subgraph get different features. Scanning the
    ``_sign_groups`` buckets in order, the first group whose entry sum is
    decisively nonzero sets the sign.

    A column where every group sum vanishes is an antisymmetric mode:
    typically some automorphism of the rooted subgraph carries the vector
    to its own negation, and then every labeling-independent orientation
    functional must vanish on it, so no consistent sign exists to pick.
    Orienting such columns by anything else (say their largest entry)
    reads the vertex numbering and can flip two ambiguous columns
    inconsistently between labelings, which no single automorphism can
    absorb. They are dropped instead: zeroed the same way under every
    labeling.
    """
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        for grp in groups:
            total = float(col[grp].sum())
            if abs(total) > SIGN_TOL:
                if total < 0:
                    out[:, j] = -col
                break
        else:
            out[:, j] = 0.0
    return out


def positional_embedding(s: AugmentedSubgraph, dim: int) -> np.ndarray:
    """n x dim matrix of sign-fixed low-eigenvalue Laplacian eigenvectors."""
    if dim < 1:
        raise ValueError("positional dimension must be positive")
    n = s.graph.num_vertices
    decomp = symmetric_eig(normalized_laplacian(s))
    k = min(n, dim)
    out = np.zeros((n, dim))
    out[:, :k] = _fix_signs(decomp.vectors[:, :k], _sign_groups(s))
    return out


@dataclass(frozen=True)
class VertexFeatures:
    """Per-vertex input features for the encoder."""

    matrix: np.ndarray
    positional_dim: int
    degree_buckets: int

    @property
    def width(self) -> int:
        return self.positional_dim + self.degree_buckets + 1


def vertex_features(s: AugmentedSubgraph, positional_dim: int = 32,
                    degree_buckets: int = 16) -> VertexFeatures:
    """Assemble [positional | one-hot degree (clamped) | ego flag]."""
    if degree_buckets < 1:
        raise ValueError("degree_buckets must be positive")
    g = s.graph
    n = g.num_vertices
    pos = positional_embedding(s, positional_dim)
    onehot = np.zeros((n, degree_buckets))
    buckets = np.minimum(g.degrees(), degree_buckets - 1)
    onehot[np.arange(n), buckets] = 1.0
    ego = np.zeros((n, 1))
    ego[s.ego, 0] = 1.0
    return VertexFeatures(matrix=np.concatenate([pos, onehot, ego], axis=1),
                          positional_dim=positional_dim, degree_buckets=degree_buckets)
