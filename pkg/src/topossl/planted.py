"""Synthetic benchmark graphs with planted structural equivalences.

The background is a homophilous multi-community random graph (chained
internally so every community is connected, communities joined in a ring).
Each motif is an identical star or clique hanging off the background
through a connector path, so motif entry nodes are pairwise far apart in
hops yet have isomorphic ego networks, which makes their persistence
images collide exactly. Motif and connector nodes carry decoy features
drawn from a background community's distribution, so only structure
separates the motif class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import Graph, load_graph


@dataclass(frozen=True)
class PlantedConfig:
    motif: str = "star"           # "star" or "clique"
    num_motifs: int = 8
    motif_size: int = 4           # leaves of a star / nodes of a clique
    path_len: int = 6             # edges between a motif entry and its anchor
    num_communities: int = 4
    community_size: int = 50
    p_in: float = 0.06
    p_out: float = 0.004
    feature_dim: int = 16
    feature_scale: float = 2.0

    def __post_init__(self):
        if self.motif not in ("star", "clique"):
            raise ConfigError(f"unknown motif kind {self.motif!r}")
        if self.num_motifs < 0:
            raise ConfigError("num_motifs must be nonnegative")
        if self.num_motifs and self.motif_size < 2:
            raise ConfigError("motifs need motif_size >= 2")
        if self.motif == "clique" and self.num_motifs and self.motif_size < 3:
            raise ConfigError("clique motifs need motif_size >= 3")
        if self.num_motifs and self.path_len < 1:
            raise ConfigError("path_len must be positive")
        if self.num_communities < 1 or self.community_size < 2:
            raise ConfigError("background needs at least one community of size 2")
        if not (0.0 <= self.p_in <= 1.0 and 0.0 <= self.p_out <= 1.0):
            raise ConfigError("edge probabilities must lie in [0, 1]")
        if self.num_motifs > self.num_communities * self.community_size:
            raise ConfigError("more motifs than available anchor nodes")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be positive")

    @property
    def motif_label(self) -> int:
        return self.num_communities


def generate_planted_graph(seed: int, params: PlantedConfig) -> tuple[Graph, list]:
    """Build one benchmark instance.

    Returns the graph (labels: community id for background, an extra class
    for motif/connector nodes; features attached) and the planted list of
    motif entry-node pairs. Entry nodes of two motifs are at hop distance
    at least 2 * path_len + 1, so any delta up to that mines them.
    """
    rng = np.random.default_rng(seed)
    C, S = params.num_communities, params.community_size
    n_background = C * S
    edges = []

    for c in range(C):
        base = c * S
        # chain keeps the community connected regardless of p_in
        for i in range(S - 1):
            edges.append((base + i, base + i + 1))
        iu, iv = np.triu_indices(S, k=1)
        take = rng.random(len(iu)) < params.p_in
        for a, b in zip(iu[take], iv[take]):
            edges.append((base + int(a), base + int(b)))
    if C > 1:
        for c in range(C):
            edges.append((c * S, ((c + 1) % C) * S))
        cross_u, cross_v = [], []
        for c1 in range(C):
            for c2 in range(c1 + 1, C):
                iu = np.repeat(np.arange(S), S) + c1 * S
                iv = np.tile(np.arange(S), S) + c2 * S
                take = rng.random(len(iu)) < params.p_out
                cross_u.append(iu[take])
                cross_v.append(iv[take])
        for a, b in zip(np.concatenate(cross_u), np.concatenate(cross_v)):
            edges.append((int(a), int(b)))

    labels = [c for c in range(C) for _ in range(S)]
    next_id = n_background
    entries = []
    decoy = []
    for m in range(params.num_motifs):
        anchor = (m % C) * S + (m // C)
        if params.motif == "star":
            center = next_id
            next_id += 1
            for _ in range(params.motif_size):
                edges.append((center, next_id))
                next_id += 1
            entry = center
            motif_nodes = 1 + params.motif_size
        else:
            first = next_id
            for a in range(params.motif_size):
                for b in range(a + 1, params.motif_size):
                    edges.append((first + a, first + b))
            next_id += params.motif_size
            entry = first
            motif_nodes = params.motif_size
        prev = entry
        for _ in range(params.path_len - 1):
            edges.append((prev, next_id))
            prev = next_id
            next_id += 1
        edges.append((prev, anchor))
        entries.append(entry)
        labels.extend([params.motif_label] * (motif_nodes + params.path_len - 1))
        decoy.extend([m % C] * (motif_nodes + params.path_len - 1))

    num_nodes = next_id
    labels = np.asarray(labels, dtype=np.int64)
    means = rng.normal(0.0, params.feature_scale, size=(C, params.feature_dim))
    features = rng.normal(0.0, 1.0, size=(num_nodes, params.feature_dim))
    features[:n_background] += means[labels[:n_background]]
    # decoy means: a whole motif mimics its anchor's community, so features
    # alone pull its nodes toward the wrong class
    if decoy:
        features[n_background:] += means[np.asarray(decoy)]
    g = load_graph(edges, num_nodes, features=features.astype(np.float32), labels=labels)
    planted = [(entries[i], entries[j])
               for i in range(len(entries)) for j in range(i + 1, len(entries))]
    return g, planted
