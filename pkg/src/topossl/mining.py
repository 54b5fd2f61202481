"""Positive-pair mining and the neighborhood-bias report.

A pair (u, v) qualifies when its hop distance is at least delta (checked
with a BFS truncated at delta - 1, so only a certified lower bound is ever
used) and the Euclidean distance between the two persistence-image vectors
is at most epsilon. Epsilon is either absolute or a quantile of distances
over sampled non-neighbor pairs. Survivors are capped per node, nearest
first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .graph import Graph, bfs_distances

EXHAUSTIVE_NODE_LIMIT = 20_000

# The blocked Gram expansion sq[u] + sq[v] - 2 u.v carries cancellation noise
# around 1e-16, far above any meaningful image gap it could misjudge. Blocks
# therefore prescreen with a loose pad and the exact difference-based distance
# makes the final inclusive cut, so ties (distance exactly eps, or 0.0 rows)
# never flicker in and out of the candidate set.
_PRESCREEN_PAD = 1e-6
_DIST_TOL = 1e-12


@dataclass(frozen=True)
class MiningConfig:
    delta: int = 5
    epsilon_mode: str = "quantile"      # "quantile" or "absolute"
    epsilon_q: float = 0.1
    epsilon_abs: float | None = None
    max_pairs_per_node: int = 10
    candidate_strategy: str = "exhaustive"  # "exhaustive" or "sampled"
    sample_k: int = 50
    quantile_pool_budget: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.delta < 2:
            raise ConfigError(f"delta must be at least 2, got {self.delta}")
        if self.epsilon_mode not in ("quantile", "absolute"):
            raise ConfigError(f"unknown epsilon mode {self.epsilon_mode!r}")
        if self.epsilon_mode == "quantile" and not (0.0 < self.epsilon_q < 1.0):
            raise ConfigError(f"epsilon_q must lie in (0, 1), got {self.epsilon_q}")
        if self.epsilon_mode == "absolute":
            if self.epsilon_abs is None or self.epsilon_abs < 0:
                raise ConfigError("absolute mode needs a nonnegative epsilon_abs")
        if self.max_pairs_per_node < 1:
            raise ConfigError("max_pairs_per_node must be positive")
        if self.candidate_strategy not in ("exhaustive", "sampled"):
            raise ConfigError(f"unknown candidate strategy {self.candidate_strategy!r}")
        if self.candidate_strategy == "sampled" and self.sample_k < 1:
            raise ConfigError("sample_k must be positive")


@dataclass
class PositivePairSet:
    """Mined pairs, each (u, v, distance, hop_lower_bound) with u < v,
    sorted by (u, v) and duplicate free. epsilon_effective records the
    threshold actually applied."""

    pairs: list
    delta: int
    epsilon_effective: float

    def __len__(self):
        return len(self.pairs)

    def as_array(self) -> np.ndarray:
        if not self.pairs:
            return np.empty((0, 2), dtype=np.int64)
        return np.asarray([(u, v) for u, v, _, _ in self.pairs], dtype=np.int64)

    def distances(self) -> np.ndarray:
        return np.asarray([d for _, _, d, _ in self.pairs], dtype=np.float64)


def _pair_count(n: int) -> int:
    return n * (n - 1) // 2


def _decode_pairs(flat: np.ndarray, n: int) -> np.ndarray:
    """Map flat indices in [0, C(n,2)) to (u, v) rows with u < v."""
    cum = np.cumsum(np.arange(n - 1, 0, -1))
    u = np.searchsorted(cum, flat, side="right")
    prev = np.where(u > 0, cum[np.maximum(u - 1, 0)], 0)
    v = u + 1 + (flat - prev)
    return np.stack([u, v], axis=1).astype(np.int64)


def _sample_pairs(n: int, budget: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform (u, v) pairs with u < v; exact enumeration when they all fit."""
    total = _pair_count(n)
    if total <= budget:
        flat = np.arange(total, dtype=np.int64)
    elif total <= 8_000_000:
        flat = rng.choice(total, size=budget, replace=False).astype(np.int64)
    else:
        flat = np.unique(rng.integers(0, total, size=2 * budget, dtype=np.int64))[:budget]
    return _decode_pairs(flat, n)


def _adjacency_mask(g: Graph, pairs: np.ndarray) -> np.ndarray:
    out = np.empty(len(pairs), dtype=bool)
    for i, (u, v) in enumerate(pairs):
        row = g.neighbors(int(u))
        k = np.searchsorted(row, v)
        out[i] = k < len(row) and row[k] == v
    return out


def _pair_distances(pi: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    diff = pi[pairs[:, 0]] - pi[pairs[:, 1]]
    return np.sqrt((diff * diff).sum(axis=1))


def effective_epsilon(g: Graph, pi: np.ndarray, cfg: MiningConfig) -> float:
    """Resolve the distance threshold for this graph and image store."""
    if cfg.epsilon_mode == "absolute":
        return float(cfg.epsilon_abs)
    rng = np.random.default_rng(cfg.seed)
    pairs = _sample_pairs(g.num_nodes, cfg.quantile_pool_budget, rng)
    pairs = pairs[~_adjacency_mask(g, pairs)]
    if len(pairs) == 0:
        raise DataError("no non-neighbor pairs to fit the distance quantile on")
    return float(np.quantile(_pair_distances(pi, pairs), cfg.epsilon_q))


def _candidate_pairs(pi: np.ndarray, eps: float, cfg: MiningConfig) -> np.ndarray:
    """Pairs plausibly within eps, before the exact cut and the hop filter.
    Exhaustive scans every pair in blocks; sampled unions each node's
    sample_k nearest, so with a covering sample the two agree exactly."""
    n = len(pi)
    cut = (eps + _PRESCREEN_PAD) ** 2
    if cfg.candidate_strategy == "exhaustive":
        if n > EXHAUSTIVE_NODE_LIMIT:
            raise ConfigError(
                f"exhaustive mining is limited to {EXHAUSTIVE_NODE_LIMIT} nodes; "
                f"use the sampled strategy")
        found = []
        block = max(1, 2_000_000 // max(n, 1))
        sq = (pi * pi).sum(axis=1)
        for start in range(0, n, block):
            stop = min(start + block, n)
            d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (pi[start:stop] @ pi.T)
            np.maximum(d2, 0.0, out=d2)
            rows, cols = np.nonzero(d2 <= cut)
            rows = rows + start
            keep = rows < cols
            if keep.any():
                found.append(np.stack([rows[keep], cols[keep]], axis=1))
        if not found:
            return np.empty((0, 2), dtype=np.int64)
        return np.unique(np.concatenate(found), axis=0)
    # sampled: per-node k nearest neighbors by image distance
    k = min(cfg.sample_k, n - 1)
    sq = (pi * pi).sum(axis=1)
    found = []
    block = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (pi[start:stop] @ pi.T)
        np.maximum(d2, 0.0, out=d2)
        for i in range(stop - start):
            d2[i, start + i] = np.inf
        idx = np.argpartition(d2, k - 1, axis=1)[:, :k]
        for i in range(stop - start):
            u = start + i
            for v in idx[i]:
                if d2[i, v] <= cut:
                    found.append((min(u, int(v)), max(u, int(v))))
    if not found:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.asarray(found, dtype=np.int64), axis=0)


def mine_positive_pairs(g: Graph, pi: np.ndarray, cfg: MiningConfig) -> PositivePairSet:
    """Mine structurally equivalent, topologically distant node pairs."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.size == 0 or len(pi) == 0:
        raise DataError("empty persistence-image store")
    if len(pi) != g.num_nodes:
        raise DataError(
            f"image store has {len(pi)} rows for a {g.num_nodes}-node graph")
    try:
        eps = effective_epsilon(g, pi, cfg)
    except DataError:
        # complete graphs have no non-neighbor pool to fit a quantile on,
        # but mining them is still well defined: nothing clears the hop bar
        return PositivePairSet(pairs=[], delta=cfg.delta,
                               epsilon_effective=float("nan"))
    cand = _candidate_pairs(pi, eps, cfg)
    dists = _pair_distances(pi, cand) if len(cand) else np.empty(0)
    if len(cand):
        keep = dists <= eps + _DIST_TOL + 1e-9 * eps
        cand, dists = cand[keep], dists[keep]

    # hop filter: one truncated BFS per distinct source certifies hop >= delta
    survivors = []
    by_u: dict[int, list[int]] = {}
    for i, (u, v) in enumerate(cand):
        by_u.setdefault(int(u), []).append(i)
    for u, rows in by_u.items():
        dist = bfs_distances(g, u, cap=cfg.delta - 1)
        for i in rows:
            v = int(cand[i, 1])
            if dist[v] < 0:
                survivors.append((float(dists[i]), u, v))
    survivors.sort()

    counts = np.zeros(g.num_nodes, dtype=np.int64)
    kept = []
    for d, u, v in survivors:
        if counts[u] < cfg.max_pairs_per_node and counts[v] < cfg.max_pairs_per_node:
            counts[u] += 1
            counts[v] += 1
            kept.append((u, v, d, cfg.delta))
    kept.sort(key=lambda r: (r[0], r[1]))
    return PositivePairSet(pairs=kept, delta=cfg.delta, epsilon_effective=eps)


# ---------------------------------------------------------------------------
# pairs file
# ---------------------------------------------------------------------------

def write_pairs(path, ps: PositivePairSet, header: dict | None = None) -> None:
    """Write ``u<TAB>v<TAB>distance<TAB>hop_lb`` lines with # provenance."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# positive pairs v1\n")
        fh.write(f"# delta={ps.delta} epsilon={ps.epsilon_effective!r} n={len(ps.pairs)}\n")
        for key in sorted(header or {}):
            fh.write(f"# {key}={header[key]}\n")
        for u, v, d, hop_lb in ps.pairs:
            fh.write(f"{u}\t{v}\t{d!r}\t{hop_lb}\n")


def read_pairs(path) -> tuple[PositivePairSet, dict]:
    meta = {}
    rows = []
    delta = None
    eps = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                for part in line[1:].strip().split():
                    if "=" in part:
                        key, val = part.split("=", 1)
                        meta[key] = val
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected u, v, distance, hop_lb")
            rows.append((int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3])))
    if "delta" in meta:
        delta = int(meta["delta"])
    if "epsilon" in meta:
        eps = float(meta["epsilon"])
    return (PositivePairSet(pairs=rows, delta=delta if delta is not None else 2,
                            epsilon_effective=eps if eps is not None else float("nan")),
            meta)


# ---------------------------------------------------------------------------
# bias report
# ---------------------------------------------------------------------------

@dataclass
class BiasReport:
    """Distance and hop statistics over sampled non-neighbor pairs.

    Every mean is computed over connected pairs only; the unreachable
    fraction is reported on its own. per_hop_positive_distance maps h to
    the mean image distance among same-label pairs with hop >= h.
    """

    avg_hops: float
    unreachable_fraction: float
    avg_topo_distance: float
    per_hop_positive_distance: dict
    per_hop_counts: dict
    negative_nonneighbor_distance: float | None
    negative_count: int
    sampled_pairs: int

    def to_kv(self) -> str:
        lines = [
            f"sampled_pairs {self.sampled_pairs}",
            f"avg_hops {self.avg_hops!r}",
            f"unreachable_fraction {self.unreachable_fraction!r}",
            f"avg_topo_distance {self.avg_topo_distance!r}",
        ]
        for h in sorted(self.per_hop_positive_distance):
            val = self.per_hop_positive_distance[h]
            lines.append(f"positive_distance_hop_{h} "
                         + ("nan" if val is None else repr(val)))
            lines.append(f"positive_count_hop_{h} {self.per_hop_counts[h]}")
        lines.append("negative_nonneighbor_distance "
                     + ("nan" if self.negative_nonneighbor_distance is None
                        else repr(self.negative_nonneighbor_distance)))
        lines.append(f"negative_count {self.negative_count}")
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        rows = [("average hops", f"{self.avg_hops:.4f}"),
                ("average topo distance", f"{self.avg_topo_distance:.4f}")]
        for h in sorted(self.per_hop_positive_distance):
            val = self.per_hop_positive_distance[h]
            rows.append((f"same label, hop >= {h}",
                         "n/a" if val is None else f"{val:.4f}"))
        rows.append(("different label, non-neighbor",
                     "n/a" if self.negative_nonneighbor_distance is None
                     else f"{self.negative_nonneighbor_distance:.4f}"))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {val}" for name, val in rows) + "\n"


def neighbor_bias_report(g: Graph, pi: np.ndarray, sample_budget: int = 20_000,
                         seed: int = 0, hops=(3, 4, 5, 6)) -> BiasReport:
    """Measure how image distance stratifies by hops and labels."""
    if g.labels is None:
        raise DataError("bias report needs node labels")
    pi = np.asarray(pi, dtype=np.float64)
    if len(pi) != g.num_nodes:
        raise DataError("image store size does not match the graph")
    rng = np.random.default_rng(seed)
    pairs = _sample_pairs(g.num_nodes, sample_budget, rng)
    pairs = pairs[~_adjacency_mask(g, pairs)]
    if len(pairs) == 0:
        raise DataError("no non-neighbor pairs to sample")
    dists = _pair_distances(pi, pairs)

    hop = np.empty(len(pairs), dtype=np.int64)
    by_u: dict[int, list[int]] = {}
    for i, (u, _) in enumerate(pairs):
        by_u.setdefault(int(u), []).append(i)
    for u, rows in by_u.items():
        d = bfs_distances(g, u)
        for i in rows:
            hop[i] = d[pairs[i, 1]]

    connected = hop >= 0
    if not connected.any():
        raise DataError("all sampled pairs are disconnected")
    same = g.labels[pairs[:, 0]] == g.labels[pairs[:, 1]]

    per_hop = {}
    per_count = {}
    for h in hops:
        sel = connected & same & (hop >= h)
        per_count[h] = int(sel.sum())
        per_hop[h] = float(dists[sel].mean()) if sel.any() else None
    neg = connected & ~same
    return BiasReport(
        avg_hops=float(hop[connected].mean()),
        unreachable_fraction=float((~connected).mean()),
        avg_topo_distance=float(dists[connected].mean()),
        per_hop_positive_distance=per_hop,
        per_hop_counts=per_count,
        negative_nonneighbor_distance=float(dists[neg].mean()) if neg.any() else None,
        negative_count=int(neg.sum()),
        sampled_pairs=int(len(pairs)))
