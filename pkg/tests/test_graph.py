"""Graph container, traversal, ego-nets, and file formats.

Oracles: networkx BFS / components / ego_graph on seeded random graphs.
"""

import numpy as np
import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

import topossl as t
from topossl.graph import (read_edge_list, write_edge_list, read_labels,
                           write_labels, read_features, write_features)
from conftest import er_graph, connected_er_graph


def to_nx(g):
    gx = nx.Graph()
    gx.add_nodes_from(range(g.num_nodes))
    gx.add_edges_from(map(tuple, g.edges_array()))
    return gx


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_load_dedups_and_drops_self_loops():
    g = t.load_graph([(0, 1), (1, 0), (1, 1), (1, 2)], 3)
    assert g.edges_array().tolist() == [[0, 1], [1, 2]]
    assert g.num_edges == 2


def test_isolated_nodes_are_kept():
    g = t.load_graph([(0, 1)], 5)
    assert g.num_nodes == 5
    assert g.degrees().tolist() == [1, 1, 0, 0, 0]


def test_out_of_range_id_rejected():
    with pytest.raises(t.DataError):
        t.load_graph([(0, 3)], 3)


def test_empty_edge_list_warns_but_loads():
    with pytest.warns(UserWarning):
        g = t.load_graph([], 4)
    assert g.num_edges == 0


def test_neighbor_lists_sorted_and_symmetric():
    g = er_graph(40, 0.15, seed=7)
    for u in range(g.num_nodes):
        nbrs = g.neighbors(u)
        assert (np.diff(nbrs) > 0).all()
        for v in nbrs:
            assert u in g.neighbors(int(v))


def test_content_hash_ignores_input_order():
    edges = [(0, 1), (1, 2), (2, 3)]
    a = t.load_graph(edges, 4)
    b = t.load_graph([(v, u) for u, v in reversed(edges)], 4)
    assert a.content_hash() == b.content_hash()
    c = t.load_graph(edges + [(0, 3)], 4)
    assert a.content_hash() != c.content_hash()


# ---------------------------------------------------------------------------
# BFS and hop distances
# ---------------------------------------------------------------------------

def test_bfs_distances_match_networkx():
    for seed in range(5):
        g = er_graph(30, 0.1, seed=seed)
        gx = to_nx(g)
        for src in (0, 7, 29):
            want = nx.single_source_shortest_path_length(gx, src)
            got = t.bfs_distances(g, src)
            for v in range(g.num_nodes):
                assert got[v] == want.get(v, -1)


def test_bfs_cap_truncates():
    g = t.load_graph([(i, i + 1) for i in range(6)], 7)
    d = t.bfs_distances(g, 0, cap=2)
    assert d.tolist() == [0, 1, 2, -1, -1, -1, -1]


def test_hop_distance_documented_cases(path5):
    assert t.hop_distance(path5, 2, 2).value == 0
    g = t.load_graph([(0, 1), (1, 2), (2, 3)], 4)
    hd = t.hop_distance(g, 0, 3, cap=10)
    assert hd.kind == "exact" and hd.value == 3
    two = t.load_graph([(0, 1), (2, 3)], 4)
    assert t.hop_distance(two, 0, 3).kind == "unreachable"


def test_hop_distance_cap_gives_lower_bound(path5):
    hd = t.hop_distance(path5, 0, 4, cap=2)
    assert hd.kind == "at_least" and hd.value == 3
    assert hd.satisfies_min(3)
    assert not hd.satisfies_min(4)
    assert t.hop_distance(path5, 0, 4, cap=2 * 10).value == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_hop_distance_symmetric_with_triangle_inequality(seed):
    g = connected_er_graph(12, 0.2, seed)
    rng = np.random.default_rng(seed + 1)
    nodes = rng.integers(0, 12, size=3)
    a, b, c = (int(x) for x in nodes)
    dab = t.hop_distance(g, a, b).value
    assert dab == t.hop_distance(g, b, a).value
    assert dab <= t.hop_distance(g, a, c).value + t.hop_distance(g, c, b).value


# ---------------------------------------------------------------------------
# ego-nets
# ---------------------------------------------------------------------------

def test_ego_net_documented_cases(path5):
    ego = t.ego_net(path5, 0, 2)
    assert ego.members.tolist() == [0, 1, 2]
    assert [ego.parent_edge(k) for k in range(len(ego.local_edges))] == \
        [(0, 1), (1, 2)]

    lonely = t.load_graph([(0, 1)], 3)
    e = t.ego_net(lonely, 2, 2)
    assert e.members.tolist() == [2] and len(e.local_edges) == 0

    star = t.load_graph([(0, k) for k in range(1, 6)], 6)
    full = t.ego_net(star, 0, 1)
    assert full.members.tolist() == list(range(6))
    assert len(full.local_edges) == 5


def test_ego_net_matches_bfs_ball_oracle():
    for seed in range(8):
        g = er_graph(50, 0.06, seed=seed)
        gx = to_nx(g)
        for v in (0, 13, 49):
            for r in (1, 2):
                ego = t.ego_net(g, v, r)
                ball = nx.ego_graph(gx, v, radius=r)
                assert ego.members.tolist() == sorted(ball.nodes)
                got = {ego.parent_edge(k) for k in range(len(ego.local_edges))}
                want = {(min(a, b), max(a, b)) for a, b in ball.edges}
                assert got == want


def test_ego_net_local_ids_consistent():
    g = er_graph(25, 0.15, seed=3)
    ego = t.ego_net(g, 5, 2)
    for k, (a, b) in enumerate(ego.local_edges):
        pu, pv = ego.parent_edge(k)
        assert ego.members[a] == pu and ego.members[b] == pv
        assert ego.id_map[pu] == a and ego.id_map[pv] == b


# ---------------------------------------------------------------------------
# components and homophily
# ---------------------------------------------------------------------------

def test_components_and_lcc():
    g = t.load_graph([(0, 1), (1, 2), (3, 4)], 6)
    comp = t.largest_connected_component(g)
    sub, kept = comp
    assert kept.tolist() == [0, 1, 2]
    assert sub.num_nodes == 3 and sub.num_edges == 2


def test_lcc_matches_networkx_on_random_graphs():
    for seed in range(6):
        g = er_graph(40, 0.04, seed=seed)
        gx = to_nx(g)
        want = max(nx.connected_components(gx), key=lambda c: (len(c), -min(c)))
        _, kept = t.largest_connected_component(g)
        assert len(kept) == len(want)


def test_homophily_documented_cases():
    same = t.load_graph([(0, 1), (1, 2)], 3, labels=np.zeros(3, dtype=np.int64))
    assert t.homophily_index(same) == 1.0
    cross = t.load_graph([(0, 2), (0, 3), (1, 2)], 4,
                         labels=np.array([0, 0, 1, 1]))
    assert t.homophily_index(cross) == 0.0


def test_homophily_requires_labels_and_edges():
    with pytest.raises(t.DataError):
        t.homophily_index(t.load_graph([(0, 1)], 2))
    with pytest.warns(UserWarning):
        empty = t.load_graph([], 2, labels=np.zeros(2, dtype=np.int64))
    with pytest.raises(t.DataError):
        t.homophily_index(empty)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_homophily_invariant_under_label_relabeling(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, size=20)
    g = er_graph(20, 0.2, seed=seed, labels=labels)
    if g.num_edges == 0:
        return
    perm = rng.permutation(4)
    relabeled = er_graph(20, 0.2, seed=seed, labels=perm[labels])
    assert t.homophily_index(g) == t.homophily_index(relabeled)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def test_edge_list_round_trip(tmp_path):
    path = tmp_path / "edges.tsv"
    write_edge_list(path, [(0, 1), (2, 3)])
    assert read_edge_list(path).tolist() == [[0, 1], [2, 3]]


def test_edge_list_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "edges.tsv"
    path.write_text("# header\n0\t1\n\n1\t2\n", encoding="utf-8")
    assert read_edge_list(path).tolist() == [[0, 1], [1, 2]]


def test_labels_round_trip_and_coverage(tmp_path):
    path = tmp_path / "labels.tsv"
    write_labels(path, [1, 0, 2])
    assert read_labels(path, 3).tolist() == [1, 0, 2]
    with pytest.raises(t.DataError):
        read_labels(path, 4)


def test_features_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(11)
    mat = rng.normal(size=(7, 3)).astype(np.float32)
    path = tmp_path / "x.bin"
    write_features(path, mat)
    assert path.read_bytes()[:4] == b"TEFX"
    back = read_features(path)
    assert back.dtype == np.float32
    assert (back == mat).all()
    write_features(tmp_path / "y.bin", mat)
    assert path.read_bytes() == (tmp_path / "y.bin").read_bytes()


def test_load_dataset_with_lcc(tmp_path):
    write_edge_list(tmp_path / "e.tsv", [(0, 1), (1, 2), (3, 4)])
    write_labels(tmp_path / "y.tsv", [0, 0, 1, 1, 1])
    g = t.load_dataset(tmp_path / "e.tsv", labels_path=tmp_path / "y.tsv", lcc=True)
    assert g.num_nodes == 3
    assert g.labels.tolist() == [0, 0, 1]
    whole = t.load_dataset(tmp_path / "e.tsv", labels_path=tmp_path / "y.tsv")
    assert whole.num_nodes == 5
