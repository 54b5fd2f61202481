"""Sublevel-set persistent homology of ego networks.

A graph is a 1-complex, so the diagram has exactly two layers: H0 pairs
from component merges (union-find with the elder rule) and H1 points born
when an edge closes a cycle. Cycles on a graph never die, so every H1
death is infinite, and each connected component contributes one essential
H0 point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .graph import EgoNet


@dataclass(frozen=True)
class FiltrationAssignment:
    """Values on every vertex and edge of one ego network.

    source records which function generated the values: "edge" when raw
    values lived on edges (curvature) and were pulled to nodes by incident
    minimum, "node" when raw values lived on nodes (degree) and were pushed
    to edges by endpoint maximum. edges mirrors the ego network's
    local_edges so the assignment is self-contained.
    """

    node_values: np.ndarray
    edge_values: np.ndarray
    edges: np.ndarray
    source: str

    def __post_init__(self):
        if self.source not in ("node", "edge"):
            raise DataError(f"unknown filtration source {self.source!r}")
        if len(self.edge_values) != len(self.edges):
            raise DataError("edge value count differs from edge count")


def lift_values(egonet: EgoNet, raw, source: str) -> FiltrationAssignment:
    """Turn a raw node or edge function into a full filtration assignment.

    For ``source="node"`` raw maps parent node id -> value (an array or a
    dict) and each edge gets the max of its endpoints. For
    ``source="edge"`` raw maps parent edge (u, v) with u < v -> value and
    each node gets the min over its incident edges; a node with no
    incident edge in the ego network falls back to the minimum edge value
    present, or 0.0 when the ego network has no edges at all.
    """
    members = egonet.members
    edges = egonet.local_edges
    if source == "node":
        if isinstance(raw, dict):
            try:
                node_values = np.array([float(raw[int(p)]) for p in members])
            except KeyError as exc:
                raise DataError(f"missing node value for node {exc.args[0]}") from exc
        else:
            raw = np.asarray(raw, dtype=np.float64)
            node_values = raw[members].astype(np.float64)
        if len(edges):
            edge_values = np.maximum(node_values[edges[:, 0]], node_values[edges[:, 1]])
        else:
            edge_values = np.empty(0, dtype=np.float64)
    elif source == "edge":
        vals = []
        for k in range(len(edges)):
            pu, pv = egonet.parent_edge(k)
            try:
                vals.append(float(raw[(pu, pv)]))
            except KeyError as exc:
                raise DataError(f"missing edge value for edge {(pu, pv)}") from exc
        edge_values = np.asarray(vals, dtype=np.float64)
        node_values = np.full(len(members), np.inf)
        for k, (lu, lv) in enumerate(edges):
            node_values[lu] = min(node_values[lu], edge_values[k])
            node_values[lv] = min(node_values[lv], edge_values[k])
        fallback = float(edge_values.min()) if len(edge_values) else 0.0
        node_values[np.isinf(node_values)] = fallback
    else:
        raise DataError(f"unknown filtration source {source!r}")
    return FiltrationAssignment(node_values=node_values, edge_values=edge_values,
                                edges=edges, source=source)


def sublevel_filtration(fa: FiltrationAssignment) -> list:
    """Simplices of the sublevel filtration, sorted for insertion.

    Each entry is (value, dim, ids) with ids a 1-tuple for vertices and a
    local (u, v) pair for edges. Ties order vertices before edges and then
    by ids, so the insertion order is a total order.
    """
    if np.isnan(fa.node_values).any() or np.isnan(fa.edge_values).any():
        raise NumericError("NaN filtration value")
    simplices = [(float(v), 0, (int(i),)) for i, v in enumerate(fa.node_values)]
    simplices += [(float(fa.edge_values[k]), 1, (int(u), int(v)))
                  for k, (u, v) in enumerate(fa.edges)]
    simplices.sort(key=lambda s: (s[0], s[1], s[2]))
    return simplices


@dataclass
class PersistenceDiagram:
    """H0 and H1 points of one filtration, plus bookkeeping counts.

    h0 and h1 are (k, 2) float arrays of (birth, death), death = inf for
    essential points, sorted by (birth, death). Zero-persistence H0 pairs
    are counted in zero_persistence_dropped but excluded from h0, so
    zero_persistence_dropped + len(h0) == num_vertices always holds.
    """

    h0: np.ndarray
    h1: np.ndarray
    zero_persistence_dropped: int
    num_vertices: int

    @property
    def essential_h0(self) -> int:
        return int(np.isinf(self.h0[:, 1]).sum()) if len(self.h0) else 0

    def finite_h0(self) -> np.ndarray:
        return self.h0[np.isfinite(self.h0[:, 1])] if len(self.h0) else self.h0


def persistence_diagram(filtration: list) -> PersistenceDiagram:
    """Union-find persistence over an ordered sublevel filtration.

    Elder rule: when an edge merges two components the one with the larger
    birth value dies at the edge value; on equal births the component whose
    root vertex has the larger id dies. Pairs with birth == death are
    dropped and counted. An edge inside one component births an H1 point
    that never dies.
    """
    parent: dict[int, int] = {}
    birth: dict[int, float] = {}

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    h0 = []
    h1 = []
    dropped = 0
    num_vertices = 0
    for value, dim, ids in filtration:
        if dim == 0:
            v = ids[0]
            if v in parent:
                raise DataError(f"vertex {v} appears twice in the filtration")
            parent[v] = v
            birth[v] = value
            num_vertices += 1
        else:
            u, v = ids
            if u not in parent or v not in parent:
                raise DataError(f"edge {ids} precedes one of its endpoints")
            ru, rv = find(u), find(v)
            if ru == rv:
                h1.append((value, math.inf))
                continue
            # the younger root dies; ties fall to the larger root id
            dies, lives = (ru, rv) if (birth[ru], ru) > (birth[rv], rv) else (rv, ru)
            if birth[dies] == value:
                dropped += 1
            else:
                h0.append((birth[dies], value))
            parent[dies] = lives
    for v in parent:
        if parent[v] == v:
            h0.append((birth[v], math.inf))
    h0.sort()
    h1.sort()
    return PersistenceDiagram(
        h0=np.asarray(h0, dtype=np.float64).reshape(-1, 2),
        h1=np.asarray(h1, dtype=np.float64).reshape(-1, 2),
        zero_persistence_dropped=dropped,
        num_vertices=num_vertices)


# ---------------------------------------------------------------------------
# debug dump
# ---------------------------------------------------------------------------

def diagram_to_text(pd: PersistenceDiagram) -> str:
    """Serialize as ``dim<TAB>birth<TAB>death`` lines, inf spelled out."""
    lines = []
    for dim, arr in ((0, pd.h0), (1, pd.h1)):
        for b, d in arr:
            death = "inf" if math.isinf(d) else repr(float(d))
            lines.append(f"{dim}\t{float(b)!r}\t{death}")
    return "\n".join(lines) + ("\n" if lines else "")


def diagram_from_text(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a dump back into (h0, h1) arrays; counts are not recoverable."""
    h0, h1 = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"diagram dump line {lineno}: expected dim, birth, death")
        dim = int(parts[0])
        point = (float(parts[1]), math.inf if parts[2] == "inf" else float(parts[2]))
        (h0 if dim == 0 else h1).append(point)
    return (np.asarray(h0, dtype=np.float64).reshape(-1, 2),
            np.asarray(h1, dtype=np.float64).reshape(-1, 2))
