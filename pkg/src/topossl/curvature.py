"""Edge values from Ollivier-Ricci curvature, node values from degree.

The curvature of an edge (u, v) is kappa = 1 - W(m_u, m_v), where m_i puts
mass alpha on i and spreads the rest uniformly over its neighbors, and W is
the exact 1-Wasserstein distance under the shortest-path ground metric.
Curvature is computed once per edge on the full graph; ego networks look
values up rather than recomputing on subgraphs, so an edge carries the same
value in every ego network containing it.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graph import Graph, bfs_distances

# supports of measures at adjacent nodes are one-hop balls around the two
# endpoints, so their ground distances never exceed 3
ADJACENT_SUPPORT_HOPS = 3

_MASS_TOL = 1e-12
_FLOW_TOL = 1e-14


@dataclass(frozen=True)
class NodeMeasure:
    """Probability measure of a node: alpha at the center, rest on neighbors.

    support is sorted ascending and always equals {center} union N(center),
    even when alpha is 0 or 1 and some atoms carry zero mass.
    """

    center: int
    support: np.ndarray
    mass: np.ndarray

    def total(self) -> float:
        return float(self.mass.sum())


@dataclass(frozen=True)
class TransportPlan:
    """Optimal transport plan between two node measures.

    flows holds (source_node, target_node, mass) triples with positive mass;
    cost is the plan's total work, i.e. the Wasserstein distance when the
    plan is optimal (which solve_transport guarantees).
    """

    flows: tuple
    cost: float


@dataclass(frozen=True)
class EdgeCurvature:
    u: int
    v: int
    alpha: float
    wasserstein: float
    kappa: float


def node_measure(g: Graph, i: int, alpha: float = 0.5) -> NodeMeasure:
    """One-hop mass distribution of node i."""
    if not (0 <= i < g.num_nodes):
        raise DataError(f"node id {i} out of range")
    if not (0.0 <= alpha <= 1.0):
        raise DataError(f"alpha must lie in [0, 1], got {alpha}")
    nbrs = g.neighbors(i)
    if len(nbrs) == 0:
        return NodeMeasure(center=i, support=np.array([i], dtype=np.int64),
                           mass=np.array([1.0]))
    support = np.sort(np.append(nbrs, i)).astype(np.int64)
    mass = np.full(len(support), (1.0 - alpha) / len(nbrs))
    mass[np.searchsorted(support, i)] = alpha
    return NodeMeasure(center=i, support=support, mass=mass)


def _support_distances(g: Graph, sources: np.ndarray, targets: np.ndarray,
                       max_hops: int | None) -> np.ndarray:
    """Shortest-path hop counts between two atom sets, via truncated BFS."""
    out = np.empty((len(sources), len(targets)), dtype=np.float64)
    for k, s in enumerate(sources):
        dist = bfs_distances(g, int(s), cap=max_hops)
        row = dist[targets]
        if np.any(row < 0):
            missing = targets[row < 0]
            raise DataError(
                f"no finite ground distance from node {int(s)} to node {int(missing[0])}"
                + ("" if max_hops is None else f" within {max_hops} hops"))
        out[k] = row
    return out


def solve_transport(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray):
    """Exact minimum-cost transport between two discrete distributions.

    Successive shortest augmenting paths on the residual bipartite network
    (Bellman-Ford path search, fixed arc order). Each augmentation saturates
    a supply or demand atom, so at most m + n rounds run; optimality does
    not depend on the masses being rational, only on the finite arc costs.

    Returns (flow_matrix, total_cost) where flow_matrix is (m, n).
    """
    cost = np.asarray(cost, dtype=np.float64)
    supply = np.asarray(supply, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    m, n = cost.shape
    if supply.shape != (m,) or demand.shape != (n,):
        raise DataError("supply/demand shapes do not match the cost matrix")
    if supply.min(initial=0.0) < 0 or demand.min(initial=0.0) < 0:
        raise DataError("masses must be nonnegative")
    if abs(supply.sum() - demand.sum()) > 1e-9:
        raise DataError("supply and demand totals differ")

    num_nodes = m + n + 2
    src, snk = m + n, m + n + 1
    arc_to: list[int] = []
    arc_cap: list[float] = []
    arc_cost: list[float] = []
    adj: list[list[int]] = [[] for _ in range(num_nodes)]

    def add_arc(a, b, cap, c):
        adj[a].append(len(arc_to))
        arc_to.append(b)
        arc_cap.append(cap)
        arc_cost.append(c)
        adj[b].append(len(arc_to))
        arc_to.append(a)
        arc_cap.append(0.0)
        arc_cost.append(-c)

    for i in range(m):
        add_arc(src, i, float(supply[i]), 0.0)
    for i in range(m):
        for j in range(n):
            add_arc(i, m + j, np.inf, float(cost[i, j]))
    for j in range(n):
        add_arc(m + j, snk, float(demand[j]), 0.0)

    remaining = float(min(supply.sum(), demand.sum()))
    total_arcs = len(arc_to)
    while remaining > _MASS_TOL:
        dist = [np.inf] * num_nodes
        dist[src] = 0.0
        par = [-1] * num_nodes
        for _ in range(num_nodes):
            changed = False
            for a in range(total_arcs):
                if arc_cap[a] <= _FLOW_TOL:
                    continue
                tail = arc_to[a ^ 1]
                head = arc_to[a]
                nd = dist[tail] + arc_cost[a]
                if nd < dist[head] - 1e-15:
                    dist[head] = nd
                    par[head] = a
                    changed = True
            if not changed:
                break
        if not np.isfinite(dist[snk]):
            raise DataError("transport network admits no augmenting path")
        push = remaining
        node = snk
        while node != src:
            a = par[node]
            push = min(push, arc_cap[a])
            node = arc_to[a ^ 1]
        node = snk
        while node != src:
            a = par[node]
            arc_cap[a] -= push
            arc_cap[a ^ 1] += push
            node = arc_to[a ^ 1]
        remaining -= push

    flow = np.zeros((m, n), dtype=np.float64)
    base = 2 * m  # arcs src->sources come first, two slots each
    for i in range(m):
        for j in range(n):
            a = base + 2 * (i * n + j)
            flow[i, j] = arc_cap[a ^ 1]
    return flow, float((flow * cost).sum())


def wasserstein(g: Graph, a: NodeMeasure, b: NodeMeasure,
                max_hops: int | None = None) -> TransportPlan:
    """Exact W1 distance between two node measures on the same graph.

    Zero-mass atoms are ignored. Raises if some pair of massive atoms has
    no finite ground distance (different components, or beyond max_hops).
    """
    ka = a.mass > _MASS_TOL
    kb = b.mass > _MASS_TOL
    sa, ma = a.support[ka], a.mass[ka]
    sb, mb = b.support[kb], b.mass[kb]
    dist = _support_distances(g, sa, sb, max_hops)
    flow, cost = solve_transport(dist, ma, mb)
    triples = []
    for i in range(flow.shape[0]):
        for j in range(flow.shape[1]):
            if flow[i, j] > _FLOW_TOL:
                triples.append((int(sa[i]), int(sb[j]), float(flow[i, j])))
    return TransportPlan(flows=tuple(triples), cost=cost)


def ricci_curvature(g: Graph, u: int, v: int, alpha: float = 0.5) -> EdgeCurvature:
    """Ollivier-Ricci curvature of an existing edge: kappa = 1 - W(m_u, m_v)."""
    if not g.has_edge(u, v):
        raise DataError(f"({u}, {v}) is not an edge")
    plan = wasserstein(g, node_measure(g, u, alpha), node_measure(g, v, alpha),
                       max_hops=ADJACENT_SUPPORT_HOPS)
    return EdgeCurvature(u=min(u, v), v=max(u, v), alpha=alpha,
                         wasserstein=plan.cost, kappa=1.0 - plan.cost)


def _curvature_chunk(args):
    g, alpha, rows = args
    return [(int(u), int(v), ricci_curvature(g, int(u), int(v), alpha).kappa)
            for u, v in rows]


def edge_curvatures(g: Graph, alpha: float = 0.5, workers: int = 1) -> dict:
    """Curvature for every edge of the full graph, keyed by (u, v) with u < v.

    The result is deterministic for any worker count: chunks are gathered
    back in edge order before the dict is built.
    """
    edges = g.edges_array()
    if workers <= 1 or len(edges) < 64:
        rows = _curvature_chunk((g, alpha, edges))
    else:
        chunks = np.array_split(edges, workers * 4)
        with multiprocessing.Pool(workers) as pool:
            parts = pool.map(_curvature_chunk, [(g, alpha, c) for c in chunks if len(c)])
        rows = [r for part in parts for r in part]
    return {(u, v): k for u, v, k in rows}


def degree_values(g: Graph) -> np.ndarray:
    """Node filtration values from the degree function on the full graph."""
    return g.degrees().astype(np.float64)


# ---------------------------------------------------------------------------
# curvature cache file
# ---------------------------------------------------------------------------

def write_curvature_cache(path, graph_hash: str, alpha: float, kappa: dict) -> None:
    """Persist per-edge curvatures, keyed by graph content hash in the header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# curvature v1 graph={graph_hash} alpha={alpha!r} n={len(kappa)}\n")
        for (u, v) in sorted(kappa):
            fh.write(f"{u}\t{v}\t{kappa[(u, v)]!r}\n")


def read_curvature_cache(path) -> tuple[str, float, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=", 1) for part in header.split()[2:] if "=" in part)
        if not header.startswith("# curvature v1") or "graph" not in fields:
            raise DataError(f"{path}: not a curvature cache file")
        alpha = float(fields["alpha"])
        kappa = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected u, v, kappa")
            kappa[(int(parts[0]), int(parts[1]))] = float(parts[2])
    return fields["graph"], alpha, kappa
