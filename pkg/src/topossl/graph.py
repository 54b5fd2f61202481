"""Undirected graph container, traversal primitives, and dataset I/O.

Everything downstream (curvature, filtrations, mining, training) consumes
the compressed-adjacency :class:`Graph` defined here. Construction
normalizes the edge set once (dedup, drop self loops, symmetrize, sort) so
iteration order is deterministic everywhere.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

FEATURES_MAGIC = b"TEFX"


class Graph:
    """Undirected simple graph over nodes ``0..num_nodes-1`` in CSR form.

    Parameters
    ----------
    num_nodes : int
        Number of nodes. May exceed the largest endpoint in ``indices``
        (isolated nodes are allowed).
    indptr, indices : np.ndarray
        CSR adjacency. ``indices[indptr[u]:indptr[u+1]]`` is the sorted,
        deduplicated neighbor list of ``u``. Built by :func:`load_graph`;
        construct through that unless you already hold canonical arrays.
    features : np.ndarray or None
        Optional ``(num_nodes, feature_dim)`` float32 node features.
    labels : np.ndarray or None
        Optional int64 class ids, one per node, values in
        ``0..num_classes-1``.

    Instances are treated as immutable; nothing in the package mutates a
    Graph after construction, so they are safe to share across workers.
    """

    __slots__ = ("num_nodes", "indptr", "indices", "features", "labels", "_edges_uv")

    def __init__(self, num_nodes, indptr, indices, features=None, labels=None):
        self.num_nodes = int(num_nodes)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        if self.indptr.shape != (self.num_nodes + 1,):
            raise DataError("indptr length must be num_nodes + 1")
        if features is not None:
            features = np.asarray(features, dtype=np.float32)
            if features.ndim != 2 or features.shape[0] != self.num_nodes:
                raise DataError("features must be (num_nodes, feature_dim)")
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (self.num_nodes,):
                raise DataError("labels must have one entry per node")
            if labels.size and labels.min() < 0:
                raise DataError("labels must be nonnegative class ids")
        self.features = features
        self.labels = labels
        self._edges_uv = None

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return bool(k < len(row) and row[k] == v)

    def edges_array(self) -> np.ndarray:
        """All edges as a ``(num_edges, 2)`` array with ``u < v``, lexsorted."""
        if self._edges_uv is None:
            src = np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))
            keep = src < self.indices
            self._edges_uv = np.stack([src[keep], self.indices[keep]], axis=1)
        return self._edges_uv

    def content_hash(self) -> str:
        """SHA-256 over node count and the canonical edge set (structure only)."""
        h = hashlib.sha256(b"topossl-graph-v1")
        h.update(struct.pack("<Q", self.num_nodes))
        h.update(np.ascontiguousarray(self.edges_array(), dtype=np.int64).tobytes())
        return h.hexdigest()

    def __repr__(self):
        return f"Graph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


def load_graph(edge_list, num_nodes, features=None, labels=None) -> Graph:
    """Build a :class:`Graph` from an iterable of (u, v) pairs.

    Self loops are dropped, duplicates collapse, and every edge is stored
    in both directions. Endpoints outside ``0..num_nodes-1`` raise
    :class:`DataError`. An empty edge list is allowed but warns, since
    every downstream filtration degenerates on it.
    """
    edges = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list,
                       dtype=np.int64)
    edges = edges.reshape(-1, 2)
    if edges.size:
        if edges.min() < 0 or edges.max() >= num_nodes:
            raise DataError(
                f"edge endpoint out of range for num_nodes={num_nodes}: "
                f"saw ids in [{edges.min()}, {edges.max()}]")
        edges = edges[edges[:, 0] != edges[:, 1]]
    if edges.size:
        lo = edges.min(axis=1)
        hi = edges.max(axis=1)
        und = np.unique(np.stack([lo, hi], axis=1), axis=0)
        both = np.concatenate([und, und[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(indptr, both[:, 0] + 1, 1)
        indptr = np.cumsum(indptr)
        indices = both[:, 1].copy()
    else:
        warnings.warn("graph has no edges; filtrations will be degenerate", stacklevel=2)
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        indices = np.empty(0, dtype=np.int64)
    return Graph(num_nodes, indptr, indices, features=features, labels=labels)


def bfs_distances(g: Graph, source: int, cap: int | None = None) -> np.ndarray:
    """Hop distances from ``source``; unreached nodes get -1.

    With ``cap`` the search stops after depth ``cap``, so any node whose
    true distance exceeds the cap stays -1 even when reachable.
    """
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    depth = 0
    indptr, indices = g.indptr, g.indices
    while frontier and (cap is None or depth < cap):
        nxt = []
        for u in frontier:
            for w in indices[indptr[u]:indptr[u + 1]]:
                if dist[w] < 0:
                    dist[w] = depth + 1
                    nxt.append(int(w))
        frontier = nxt
        depth += 1
    return dist


@dataclass(frozen=True)
class HopDistance:
    """Outcome of a (possibly truncated) hop-distance query.

    kind is one of ``exact``, ``at_least``, ``unreachable``. For
    ``at_least`` the value is a certified lower bound (the truncation cap
    plus one); for ``unreachable`` the value is None.
    """

    kind: str
    value: int | None

    @staticmethod
    def exact(d: int) -> "HopDistance":
        return HopDistance("exact", int(d))

    @staticmethod
    def at_least(d: int) -> "HopDistance":
        return HopDistance("at_least", int(d))

    @staticmethod
    def unreachable() -> "HopDistance":
        return HopDistance("unreachable", None)

    def satisfies_min(self, delta: int) -> bool:
        """True when hop >= delta is certain from this query result."""
        if self.kind == "unreachable":
            return True
        return self.value >= delta


def hop_distance(g: Graph, u: int, v: int, cap: int | None = None) -> HopDistance:
    """Shortest-path hop count between u and v, optionally truncated.

    Uncapped queries return an exact distance or ``unreachable``. With a
    cap the answer is exact when the true distance is <= cap, it is
    ``unreachable`` when u's component is exhausted within the cap, and it
    is ``at_least(cap + 1)`` otherwise.
    """
    for x in (u, v):
        if not (0 <= x < g.num_nodes):
            raise DataError(f"node id {x} out of range")
    if u == v:
        return HopDistance.exact(0)
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[u] = 0
    frontier = [u]
    depth = 0
    indptr, indices = g.indptr, g.indices
    while frontier:
        if cap is not None and depth >= cap:
            return HopDistance.at_least(cap + 1)
        nxt = []
        for x in frontier:
            for w in indices[indptr[x]:indptr[x + 1]]:
                if dist[w] < 0:
                    if w == v:
                        return HopDistance.exact(depth + 1)
                    dist[w] = depth + 1
                    nxt.append(int(w))
        frontier = nxt
        depth += 1
    return HopDistance.unreachable()


@dataclass
class EgoNet:
    """Induced subgraph on the closed r-hop ball around ``ego``.

    members holds parent-graph node ids sorted ascending; local ids are
    positions in that array, so parent order and local order agree.
    local_edges is ``(m, 2)`` in local ids with ``u < v``, lexsorted.
    """

    ego: int
    radius: int
    members: np.ndarray
    local_edges: np.ndarray
    id_map: dict = field(repr=False)

    @property
    def num_members(self) -> int:
        return len(self.members)

    def parent_edge(self, k: int) -> tuple[int, int]:
        """Parent-graph endpoints of local edge k."""
        lu, lv = self.local_edges[k]
        return int(self.members[lu]), int(self.members[lv])


def ego_net(g: Graph, v: int, r: int = 2) -> EgoNet:
    """Extract the ego network of ``v``: nodes within r hops, induced edges."""
    if not (0 <= v < g.num_nodes):
        raise DataError(f"node id {v} out of range")
    if r < 0:
        raise DataError("radius must be nonnegative")
    dist = bfs_distances(g, v, cap=r)
    members = np.flatnonzero(dist >= 0).astype(np.int64)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[members] = np.arange(len(members))
    rows = []
    for lu, u in enumerate(members):
        for w in g.neighbors(int(u)):
            lw = local[w]
            # induced edge, counted once in local (u < w) orientation
            if lw > lu:
                rows.append((lu, int(lw)))
    local_edges = (np.asarray(rows, dtype=np.int64).reshape(-1, 2)
                   if rows else np.empty((0, 2), dtype=np.int64))
    id_map = {int(p): int(l) for l, p in enumerate(members)}
    return EgoNet(ego=v, radius=r, members=members, local_edges=local_edges, id_map=id_map)


def connected_components(g: Graph) -> np.ndarray:
    """Component id per node, numbered by first-seen order from node 0."""
    comp = np.full(g.num_nodes, -1, dtype=np.int64)
    cid = 0
    for s in range(g.num_nodes):
        if comp[s] >= 0:
            continue
        comp[s] = cid
        stack = [s]
        while stack:
            u = stack.pop()
            for w in g.indices[g.indptr[u]:g.indptr[u + 1]]:
                if comp[w] < 0:
                    comp[w] = cid
                    stack.append(int(w))
        cid += 1
    return comp


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Restrict to the largest component, relabeling nodes to 0..k-1.

    Returns the reduced graph and the array of kept original node ids
    (sorted, so new id i corresponds to kept[i]). Ties pick the component
    seen first when scanning from node 0. Features and labels are sliced
    along.
    """
    comp = connected_components(g)
    if comp.size == 0:
        raise DataError("empty graph has no components")
    sizes = np.bincount(comp)
    keep_id = int(np.argmax(sizes))
    kept = np.flatnonzero(comp == keep_id).astype(np.int64)
    remap = np.full(g.num_nodes, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    edges = g.edges_array()
    mask = (remap[edges[:, 0]] >= 0) & (remap[edges[:, 1]] >= 0)
    new_edges = remap[edges[mask]]
    feats = g.features[kept] if g.features is not None else None
    labs = g.labels[kept] if g.labels is not None else None
    return load_graph(new_edges, len(kept), features=feats, labels=labs), kept


def homophily_index(g: Graph) -> float:
    """Fraction of edges whose endpoints share a label (edge homophily)."""
    if g.labels is None:
        raise DataError("homophily needs node labels")
    edges = g.edges_array()
    if len(edges) == 0:
        raise DataError("homophily undefined on an edgeless graph")
    same = g.labels[edges[:, 0]] == g.labels[edges[:, 1]]
    return float(np.mean(same))


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------

def read_edge_list(path) -> np.ndarray:
    """Parse a tab-separated ``u<TAB>v`` edge file; ``#`` starts a comment."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer node id") from exc
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def write_edge_list(path, edges) -> None:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in edges:
            fh.write(f"{u}\t{v}\n")


def read_labels(path, num_nodes: int) -> np.ndarray:
    """Parse ``node_id<TAB>class_id`` lines; every node must be covered."""
    labels = np.full(num_nodes, -1, dtype=np.int64)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected node_id and class_id")
            node, cls = int(parts[0]), int(parts[1])
            if not (0 <= node < num_nodes):
                raise DataError(f"{path}:{lineno}: node id {node} out of range")
            if cls < 0:
                raise DataError(f"{path}:{lineno}: class id must be nonnegative")
            labels[node] = cls
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        raise DataError(f"{path}: {missing.size} nodes without a label (first: {missing[0]})")
    return labels


def write_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        for node, cls in enumerate(labels):
            fh.write(f"{node}\t{cls}\n")


def read_features(path) -> np.ndarray:
    """Read the binary feature matrix (magic TEFX, u64 shape, f32 row-major)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURES_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {FEATURES_MAGIC!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise DataError(f"{path}: truncated header")
        rows, cols = struct.unpack("<QQ", header)
        data = np.fromfile(fh, dtype="<f4", count=rows * cols)
    if data.size != rows * cols:
        raise DataError(f"{path}: expected {rows * cols} floats, found {data.size}")
    return data.reshape(rows, cols)


def write_features(path, matrix) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise DataError("feature matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(struct.pack("<QQ", matrix.shape[0], matrix.shape[1]))
        matrix.tofile(fh)


def load_dataset(edges_path, features_path=None, labels_path=None, lcc: bool = False) -> Graph:
    """Load a dataset from its on-disk parts.

    Node count is the features row count when features are given,
    otherwise max endpoint + 1 (labels may extend it). With ``lcc`` the
    graph is reduced to its largest connected component after loading,
    which is the normal preprocessing for citation benchmarks.
    """
    edges = read_edge_list(edges_path)
    num_nodes = int(edges.max()) + 1 if edges.size else 0
    features = None
    if features_path is not None:
        features = read_features(features_path)
        if features.shape[0] < num_nodes:
            raise DataError(
                f"feature rows ({features.shape[0]}) fewer than max node id + 1 ({num_nodes})")
        num_nodes = features.shape[0]
    labels = None
    if labels_path is not None:
        if features is None:
            # labels may name isolated nodes beyond the largest edge endpoint
            raw = read_edge_list(labels_path)
            if raw.size:
                num_nodes = max(num_nodes, int(raw[:, 0].max()) + 1)
        labels = read_labels(labels_path, num_nodes)
    g = load_graph(edges, num_nodes, features=features, labels=labels)
    if lcc:
        g, _ = largest_connected_component(g)
    return g
