"""Sparse neighborhood graphs: mutual kNN construction, intersection, components.

Graphs are stored as sorted undirected edge arrays over vertex indices.
Haversine kNN is computed exactly by embedding (lat, lon) on the unit
sphere and querying a kd-tree with chord distance, which is monotone in
great-circle distance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError, ParameterError

EARTH_RADIUS_M = 6371008.8  # mean Earth radius


@dataclass(frozen=True)
class SparseAdjacency:
    """Undirected graph over n vertices; edges as an (m, 2) array with u < v,
    lexicographically sorted, no self-loops, no duplicates."""

    n: int
    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def neighbor_lists(self) -> list[np.ndarray]:
        """Per-vertex sorted neighbor arrays."""
        out = [[] for _ in range(self.n)]
        for u, v in self.edges:
            out[u].append(v)
            out[v].append(u)
        return [np.array(sorted(nb), dtype=np.int64) for nb in out]

    def edge_set(self) -> set:
        return {(int(u), int(v)) for u, v in self.edges}


def _canonical_edges(pairs: np.ndarray) -> np.ndarray:
    """Normalize to u < v, deduplicate, sort lexicographically."""
    if pairs.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    u = np.minimum(pairs[:, 0], pairs[:, 1])
    v = np.maximum(pairs[:, 0], pairs[:, 1])
    stacked = np.stack([u, v], axis=1)
    return np.unique(stacked, axis=0)


def haversine_m(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance in meters between two (degree) coordinates."""
    p1, l1, p2, l2 = map(np.radians, (lat1, lon1, lat2, lon2))
    h = np.sin((p2 - p1) / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin((l2 - l1) / 2) ** 2
    return float(2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h)))


def _sphere_embed(latlon: np.ndarray) -> np.ndarray:
    lat = np.radians(latlon[:, 0])
    lon = np.radians(latlon[:, 1])
    return np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1
    )


def _knn_lists(points: np.ndarray, k: int) -> list[np.ndarray]:
    """Exact k nearest neighbors per point, ties broken by ascending index.

    Queries k+1 (self included) for the cut distance, then widens with a
    ball query so that equidistant candidates compete by index.
    """
    n = points.shape[0]
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=k + 1)
    cut = dist[:, -1]
    # Relative slack keeps exact ties inside the ball despite fp round-off.
    radii = cut * (1 + 1e-12) + 1e-300
    candidates = tree.query_ball_point(points, radii)
    out = []
    for i in range(n):
        cand = np.array([j for j in candidates[i] if j != i], dtype=np.int64)
        d = np.linalg.norm(points[cand] - points[i], axis=1)
        order = np.lexsort((cand, d))
        out.append(cand[order[:k]])
    return out


def mutual_knn_graph(points: np.ndarray, k: int, metric: str = "euclidean") -> SparseAdjacency:
    """Mutual kNN graph: edge (i, j) iff each is among the other's k nearest.

    metric "haversine" expects (lat, lon) degree pairs; "euclidean" any m-D
    points. Distance ties are broken toward the lower vertex index.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 2:
        raise ParameterError(f"need at least 2 points, got {n}")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ParameterError(f"k={k} must be < n={n}")
    if not np.all(np.isfinite(points)):
        raise DataError("non-finite coordinates")
    if metric == "haversine":
        if points.shape[1] != 2:
            raise ParameterError("haversine metric requires (lat, lon) pairs")
        points = _sphere_embed(points)
    elif metric != "euclidean":
        raise ParameterError(f"unknown metric: {metric}")

    neighbors = _knn_lists(points, k)
    neighbor_sets = [set(nb.tolist()) for nb in neighbors]
    pairs = []
    for i, nb in enumerate(neighbors):
        for j in nb:
            if j > i and i in neighbor_sets[j]:
                pairs.append((i, j))
            elif j < i and i in neighbor_sets[j]:
                pairs.append((j, i))
    edges = _canonical_edges(np.array(pairs, dtype=np.int64).reshape(-1, 2))
    return SparseAdjacency(n=n, edges=edges)


def hadamard_intersect(a: SparseAdjacency, b: SparseAdjacency) -> SparseAdjacency:
    """Edge-wise intersection of two graphs over the same vertex set."""
    if a.n != b.n:
        raise ParameterError(f"vertex count mismatch: {a.n} != {b.n}")
    if a.n_edges == 0 or b.n_edges == 0:
        return SparseAdjacency(n=a.n, edges=np.empty((0, 2), dtype=np.int64))
    # Encode (u, v) pairs as scalars for a fast set intersection.
    key_a = a.edges[:, 0] * a.n + a.edges[:, 1]
    key_b = b.edges[:, 0] * b.n + b.edges[:, 1]
    common = np.intersect1d(key_a, key_b)
    edges = np.stack([common // a.n, common % a.n], axis=1)
    return SparseAdjacency(n=a.n, edges=edges)


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]


@dataclass(frozen=True)
class ComponentLabels:
    labels: np.ndarray
    component_sizes: dict[int, int]

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def n_components(self) -> int:
        return len(self.component_sizes)


def connected_components(adj: SparseAdjacency) -> ComponentLabels:
    """Union-find components; ids contiguous from 0, ordered by smallest member."""
    uf = UnionFind(adj.n)
    for u, v in adj.edges:
        uf.union(int(u), int(v))
    roots = np.array([uf.find(i) for i in range(adj.n)], dtype=np.int64)
    # First occurrence order = smallest member order since we scan ascending.
    _, first_idx, inverse = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_idx))
    labels = order[inverse]
    sizes = {int(c): int(s) for c, s in zip(*np.unique(labels, return_counts=True))}
    return ComponentLabels(labels=labels, component_sizes=sizes)


_MAGIC = b"SADJ"


def dump_adjacency(adj: SparseAdjacency, path) -> None:
    """Binary layout (little-endian): magic 'SADJ', n: u64, m: u64, then m
    (u32, u32) pairs with u < v in lexicographic order."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", adj.n, adj.n_edges))
        fh.write(adj.edges.astype("<u4").tobytes())


def load_adjacency(path) -> SparseAdjacency:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise DataError(f"not an adjacency file: {path}")
        n, m = struct.unpack("<QQ", fh.read(16))
        edges = np.frombuffer(fh.read(8 * m), dtype="<u4").reshape(m, 2).astype(np.int64)
    return SparseAdjacency(n=int(n), edges=edges)
