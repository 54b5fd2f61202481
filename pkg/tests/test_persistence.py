"""Sublevel filtrations and union-find persistence.

The independent oracle is a brute-force Betti sweep: at every distinct
threshold the subgraph is rebuilt from scratch and beta0 / beta1 counted
via networkx components, then compared against what the diagram claims.
"""

import math

import numpy as np
import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

import topossl as t
from topossl.persistence import diagram_from_text, diagram_to_text


def assignment(node_values, edges, edge_values, source="node"):
    return t.FiltrationAssignment(
        node_values=np.asarray(node_values, dtype=np.float64),
        edge_values=np.asarray(edge_values, dtype=np.float64),
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        source=source)


def random_assignment(seed):
    """Random small graph with a monotone value assignment (node lift)."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 13))
    mask = np.triu(rng.random((n, n)) < 0.35, k=1)
    edges = np.argwhere(mask)
    node_values = np.round(rng.normal(size=n), 2)  # rounding forces ties
    if len(edges):
        edge_values = np.maximum(node_values[edges[:, 0]], node_values[edges[:, 1]])
    else:
        edge_values = np.empty(0)
    return assignment(node_values, edges.reshape(-1, 2), edge_values)


def betti_by_sweep(fa):
    """(threshold -> (beta0, beta1)) by explicit subgraph reconstruction."""
    values = sorted(set(fa.node_values.tolist() + fa.edge_values.tolist()))
    out = {}
    for a in values:
        keep_nodes = [i for i, v in enumerate(fa.node_values) if v <= a]
        keep_edges = [tuple(e) for e, v in zip(fa.edges.tolist(), fa.edge_values)
                      if v <= a]
        gx = nx.Graph()
        gx.add_nodes_from(keep_nodes)
        gx.add_edges_from(keep_edges)
        c = nx.number_connected_components(gx)
        out[a] = (c, len(keep_edges) - len(keep_nodes) + c)
    return out


def betti_from_diagram(pd, a):
    h0 = pd.h0
    alive = int(((h0[:, 0] <= a) & (a < h0[:, 1])).sum()) if len(h0) else 0
    born_h1 = int((pd.h1[:, 0] <= a).sum()) if len(pd.h1) else 0
    return alive, born_h1


# ---------------------------------------------------------------------------
# value lifting
# ---------------------------------------------------------------------------

def test_lift_node_source_pushes_max_to_edges():
    g = t.load_graph([(0, 1)], 2)
    ego = t.ego_net(g, 0, 1)
    fa = t.lift_values(ego, np.array([1.0, 3.0]), "node")
    assert fa.edge_values.tolist() == [3.0]
    assert fa.node_values.tolist() == [1.0, 3.0]


def test_lift_edge_source_pulls_min_to_nodes():
    g = t.load_graph([(0, 1), (1, 2)], 3)
    ego = t.ego_net(g, 1, 1)
    fa = t.lift_values(ego, {(0, 1): 0.2, (1, 2): 0.7}, "edge")
    assert fa.node_values.tolist() == [0.2, 0.2, 0.7]


def test_lift_edge_source_isolated_node_fallback():
    g = t.load_graph([(0, 1)], 3)
    ego = t.ego_net(g, 2, 2)          # member set {2}, no edges
    fa = t.lift_values(ego, {(0, 1): 0.4}, "edge")
    assert fa.node_values.tolist() == [0.0]

    # a member without incident edges cannot come out of ego_net itself,
    # but the lift has to cope with hand-built assignments
    artificial = t.EgoNet(ego=0, radius=1,
                          members=np.array([0, 1, 2], dtype=np.int64),
                          local_edges=np.array([[0, 1]], dtype=np.int64),
                          id_map={0: 0, 1: 1, 2: 2})
    fa = t.lift_values(artificial, {(0, 1): 0.4}, "edge")
    assert fa.node_values.tolist() == [0.4, 0.4, 0.4]


def test_lift_missing_value_is_an_error():
    g = t.load_graph([(0, 1)], 2)
    ego = t.ego_net(g, 0, 1)
    with pytest.raises(t.DataError):
        t.lift_values(ego, {}, "edge")
    with pytest.raises(t.DataError):
        t.lift_values(ego, {0: 1.0}, "node")


# ---------------------------------------------------------------------------
# filtration ordering
# ---------------------------------------------------------------------------

def test_sublevel_order_documented_example():
    fa = assignment([1.0, 3.0, 2.0], [(0, 1), (1, 2)], [3.0, 3.0])
    assert t.sublevel_filtration(fa) == [
        (1.0, 0, (0,)),
        (2.0, 0, (2,)),
        (3.0, 0, (1,)),
        (3.0, 1, (0, 1)),
        (3.0, 1, (1, 2)),
    ]


def test_sublevel_all_equal_tie_rule():
    fa = assignment([0.0, 0.0, 0.0], [(1, 2), (0, 1)], [0.0, 0.0])
    order = t.sublevel_filtration(fa)
    assert [s[2] for s in order] == [(0,), (1,), (2,), (0, 1), (1, 2)]


def test_sublevel_vertices_only():
    fa = assignment([2.0, 1.0], np.empty((0, 2)), [])
    assert [s[2] for s in t.sublevel_filtration(fa)] == [(1,), (0,)]


def test_sublevel_rejects_nan():
    fa = assignment([0.0, float("nan")], np.empty((0, 2)), [])
    with pytest.raises(t.NumericError):
        t.sublevel_filtration(fa)


# ---------------------------------------------------------------------------
# diagrams
# ---------------------------------------------------------------------------

def test_diagram_path_documented():
    fa = assignment([1.0, 3.0, 2.0], [(0, 1), (1, 2)], [3.0, 3.0])
    pd = t.persistence_diagram(t.sublevel_filtration(fa))
    assert pd.h0.tolist() == [[1.0, math.inf], [2.0, 3.0]]
    assert len(pd.h1) == 0
    assert pd.zero_persistence_dropped == 1
    assert pd.num_vertices == 3


def test_diagram_cycle_documented():
    fa = assignment([0.0] * 4, [(0, 1), (1, 2), (2, 3), (0, 3)], [0.0] * 4)
    pd = t.persistence_diagram(t.sublevel_filtration(fa))
    assert pd.h0.tolist() == [[0.0, math.inf]]
    assert pd.h1.tolist() == [[0.0, math.inf]]
    assert pd.zero_persistence_dropped == 3


def test_diagram_single_vertex():
    fa = assignment([4.5], np.empty((0, 2)), [])
    pd = t.persistence_diagram(t.sublevel_filtration(fa))
    assert pd.h0.tolist() == [[4.5, math.inf]]
    assert pd.essential_h0 == 1 and len(pd.finite_h0()) == 0


def test_diagram_essential_point_per_component():
    fa = assignment([0.0, 1.0, 2.0, 3.0], [(0, 1), (2, 3)], [1.0, 3.0])
    pd = t.persistence_diagram(t.sublevel_filtration(fa))
    assert pd.essential_h0 == 2
    assert pd.h0.tolist() == [[0.0, math.inf], [2.0, math.inf]]
    assert pd.zero_persistence_dropped == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_count_conservation(seed):
    fa = random_assignment(seed)
    pd = t.persistence_diagram(t.sublevel_filtration(fa))
    assert pd.zero_persistence_dropped + len(pd.h0) == len(fa.node_values)
    assert pd.num_vertices == len(fa.node_values)
    # finite points die strictly after birth once zero pairs are gone
    fin = pd.finite_h0()
    assert (fin[:, 1] > fin[:, 0]).all()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_betti_sweep_oracle(seed):
    fa = random_assignment(seed)
    pd = t.persistence_diagram(t.sublevel_filtration(fa))
    for a, (b0, b1) in betti_by_sweep(fa).items():
        assert betti_from_diagram(pd, a) == (b0, b1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_diagram_invariant_under_relabeling(seed):
    fa = random_assignment(seed)
    rng = np.random.default_rng(seed + 17)
    perm = rng.permutation(len(fa.node_values))
    inv = np.argsort(perm)
    relabeled = t.FiltrationAssignment(
        node_values=fa.node_values[inv],
        edge_values=fa.edge_values,
        edges=np.sort(perm[fa.edges], axis=1) if len(fa.edges) else fa.edges,
        source=fa.source)
    a = t.persistence_diagram(t.sublevel_filtration(fa))
    b = t.persistence_diagram(t.sublevel_filtration(relabeled))
    assert sorted(map(tuple, a.h0.tolist())) == sorted(map(tuple, b.h0.tolist()))
    assert sorted(map(tuple, a.h1.tolist())) == sorted(map(tuple, b.h1.tolist()))
    assert a.zero_persistence_dropped == b.zero_persistence_dropped


def test_edge_before_endpoint_rejected():
    with pytest.raises(t.DataError):
        t.persistence_diagram([(0.0, 1, (0, 1)), (0.0, 0, (0,)), (0.0, 0, (1,))])


# ---------------------------------------------------------------------------
# dump format
# ---------------------------------------------------------------------------

def test_diagram_text_round_trip():
    fa = assignment([1.0, 3.0, 2.0], [(0, 1), (1, 2)], [3.0, 3.0])
    pd = t.persistence_diagram(t.sublevel_filtration(fa))
    h0, h1 = diagram_from_text(diagram_to_text(pd))
    assert h0.tolist() == pd.h0.tolist()
    assert h1.tolist() == pd.h1.tolist()


def test_diagram_text_rejects_malformed():
    with pytest.raises(t.DataError):
        diagram_from_text("0\t1.0\n")
