"""Shared fixtures: small named graphs and a seeded random-graph factory.

Random graphs are Erdos-Renyi draws from numpy so every test that uses
them is reproducible from an explicit seed.
"""

import numpy as np
import pytest

import topossl as t


def er_graph(n, p, seed, labels=None, features=None):
    rng = np.random.default_rng(seed)
    mask = np.triu(rng.random((n, n)) < p, k=1)
    edges = np.argwhere(mask)
    return t.load_graph([tuple(e) for e in edges], n, features=features,
                        labels=labels)


def connected_er_graph(n, p, seed):
    """ER draw plus a random spanning chain so BFS oracles see one component."""
    rng = np.random.default_rng(seed)
    mask = np.triu(rng.random((n, n)) < p, k=1)
    edges = [tuple(e) for e in np.argwhere(mask)]
    order = rng.permutation(n)
    edges += [(int(order[i]), int(order[i + 1])) for i in range(n - 1)]
    return t.load_graph(edges, n)


@pytest.fixture
def path5():
    return t.load_graph([(0, 1), (1, 2), (2, 3), (3, 4)], 5)


@pytest.fixture
def cycle4():
    return t.load_graph([(0, 1), (1, 2), (2, 3), (0, 3)], 4)


@pytest.fixture
def k3():
    return t.load_graph([(0, 1), (0, 2), (1, 2)], 3)


@pytest.fixture
def k5():
    return t.load_graph([(u, v) for u in range(5) for v in range(u + 1, 5)], 5)


@pytest.fixture
def dumbbell():
    """Two identical 5-leaf stars whose centers (0 and 12) are joined by a
    7-edge path; the long-range twin-structure instance."""
    edges = [(0, leaf) for leaf in range(1, 6)]
    chain = [0, 6, 7, 8, 9, 10, 11, 12]
    edges += list(zip(chain[:-1], chain[1:]))
    edges += [(12, leaf) for leaf in range(13, 18)]
    return t.load_graph(edges, 18)


def image_matrix_for(g, source="ricci", radius=2, resolution=0.1, alpha=0.5):
    """Full extract chain in memory: values -> diagrams -> normalized images."""
    if source == "ricci":
        raw, kind = t.edge_curvatures(g, alpha=alpha), "edge"
    else:
        raw, kind = t.degree_values(g), "node"
    diagrams = []
    for v in range(g.num_nodes):
        ego = t.ego_net(g, v, radius)
        fa = t.lift_values(ego, raw, kind)
        diagrams.append(t.persistence_diagram(t.sublevel_filtration(fa)))
    try:
        spec = t.fit_normalization(diagrams)
    except t.NumericError:
        # same fallback the extract stage applies to single-valued filtrations
        vmin = min(float(pd.h0[0, 0]) for pd in diagrams if len(pd.h0))
        spec = t.NormalizationSpec(global_min=vmin, global_max=vmin + 1.0)
    return t.image_matrix(diagrams, spec, t.PIConfig(resolution=resolution)), diagrams
