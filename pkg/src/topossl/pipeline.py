"""Staged pipeline behind the CLI: stats, extract, mine, train, sweep.

Stages communicate through files in the output directory. Every artifact
carries the hash of the effective configuration slice that produced it, so
a stage refuses upstream artifacts whose hash no longer matches, and a
rerun with an unchanged config becomes a cache hit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import curvature as curv
from . import images as img
from . import mining as mine_mod
from . import training as train_mod
from .errors import ConfigError, DataError, NumericError
from .graph import Graph, ego_net, homophily_index, load_dataset
from .persistence import diagram_to_text, lift_values, persistence_diagram, sublevel_filtration

log = logging.getLogger("topossl")

CACHE_ENV = "TOPOSSL_CACHE_DIR"

SWEEP_AXES = {
    "delta": [3, 4, 5],
    "lambda": [0.1, 0.3, 0.5, 0.7, 0.9, 1.0],
    "resolution": [0.05, 0.1],
    "filtration": ["ricci", "degree"],
}

_BOOL_KEYS = {"lcc", "reproducible", "dump_diagrams", "weight_pairs_by_distance"}
_INT_KEYS = {"radius", "delta", "max_pairs_per_node", "sample_k", "hidden_dim",
             "epochs", "patience", "negatives_per_pair", "seed", "threads",
             "sample_budget", "train_per_class", "num_val", "num_test",
             "quantile_pool_budget"}
_FLOAT_KEYS = {"alpha", "resolution", "sigma", "epsilon_q", "epsilon_abs",
               "lambda", "tau", "learning_rate", "weight_decay"}


@dataclass
class RunConfig:
    """Flat configuration for every stage; one file, one namespace.

    Unknown keys are rejected so typos fail fast. ``lambda`` is the SSL
    weight in the file and on the command line; the attribute is
    ssl_weight because of the keyword clash.
    """

    edges: str = ""
    features: str = ""
    labels: str = ""
    lcc: bool = True
    out: str = "runs/out"
    seed: int = 0
    threads: int = 1
    reproducible: bool = False

    filtration: str = "ricci"    # or "degree"
    radius: int = 2
    alpha: float = 0.5
    resolution: float = 0.05
    sigma: float = -1.0          # <= 0 means "use the resolution"
    dump_diagrams: bool = False

    delta: int = 5
    epsilon_mode: str = "quantile"
    epsilon_q: float = 0.1
    epsilon_abs: float = -1.0    # < 0 means unset
    max_pairs_per_node: int = 10
    candidate_strategy: str = "exhaustive"
    sample_k: int = 50
    quantile_pool_budget: int = 200_000

    hidden_dim: int = 16
    ssl_weight: float = 0.1
    tau: float = 0.5
    epochs: int = 1000
    patience: int = 200
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    negatives_per_pair: int = 10
    ssl_mode: str = "infonce"
    weight_pairs_by_distance: bool = False
    train_per_class: int = 20
    num_val: int = 500
    num_test: int = 1000

    sample_budget: int = 20_000  # bias-report pair sample

    # file key <-> attribute name; everything else maps by identity
    _ALIASES = {"lambda": "ssl_weight"}

    @classmethod
    def key_names(cls):
        names = [f.name for f in dataclasses.fields(cls)]
        return [("lambda" if n == "ssl_weight" else n) for n in names]

    @classmethod
    def from_items(cls, items: dict) -> "RunConfig":
        cfg = cls()
        for key, raw in items.items():
            attr = cls._ALIASES.get(key, key)
            if not hasattr(cfg, attr) or attr.startswith("_"):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, attr, _parse_value(key, raw))
        return cfg

    def apply_overrides(self, items: dict) -> "RunConfig":
        out = dataclasses.replace(self)
        for key, raw in items.items():
            attr = self._ALIASES.get(key, key)
            if not hasattr(out, attr) or attr.startswith("_"):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(out, attr, _parse_value(key, raw) if isinstance(raw, str) else raw)
        return out

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            key = "lambda" if f.name == "ssl_weight" else f.name
            val = getattr(self, f.name)
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} {val}")
        return "\n".join(lines) + "\n"

    @property
    def effective_sigma(self) -> float:
        return self.resolution if self.sigma <= 0 else self.sigma

    def mining_config(self) -> mine_mod.MiningConfig:
        return mine_mod.MiningConfig(
            delta=self.delta,
            epsilon_mode=self.epsilon_mode,
            epsilon_q=self.epsilon_q,
            epsilon_abs=None if self.epsilon_abs < 0 else self.epsilon_abs,
            max_pairs_per_node=self.max_pairs_per_node,
            candidate_strategy=self.candidate_strategy,
            sample_k=self.sample_k,
            quantile_pool_budget=self.quantile_pool_budget,
            seed=self.seed)

    def train_config(self) -> train_mod.TrainConfig:
        return train_mod.TrainConfig(
            hidden_dim=self.hidden_dim,
            ssl_weight=self.ssl_weight,
            tau=self.tau,
            epochs=self.epochs,
            patience=self.patience,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            negatives_per_pair=self.negatives_per_pair,
            ssl_mode=self.ssl_mode,
            weight_pairs_by_distance=self.weight_pairs_by_distance,
            seed=self.seed)


def _parse_value(key: str, raw: str):
    raw = raw.strip() if isinstance(raw, str) else raw
    if key in _BOOL_KEYS:
        if isinstance(raw, bool):
            return raw
        if raw in ("true", "1", "yes", "on"):
            return True
        if raw in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r} wants a boolean, got {raw!r}")
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: bad value {raw!r}") from exc
    return raw


def read_config(path) -> RunConfig:
    """Parse a flat ``key value`` config file; # starts a comment."""
    items = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 1)
            # a bare key is an empty value; run.cfg files round trip that way
            items[parts[0]] = parts[1] if len(parts) == 2 else ""
    return RunConfig.from_items(items)


def write_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(cfg.to_text(), encoding="utf-8")


# ---------------------------------------------------------------------------
# hashing and sidecars
# ---------------------------------------------------------------------------

def _hash_parts(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return h.hexdigest()


def extract_hash(cfg: RunConfig, graph_hash: str) -> str:
    return _hash_parts("extract-v1", graph_hash, cfg.filtration, cfg.radius,
                       cfg.alpha, cfg.resolution, cfg.effective_sigma)


def mine_hash(cfg: RunConfig, graph_hash: str) -> str:
    return _hash_parts("mine-v1", extract_hash(cfg, graph_hash), cfg.delta,
                       cfg.epsilon_mode, cfg.epsilon_q, cfg.epsilon_abs,
                       cfg.max_pairs_per_node, cfg.candidate_strategy,
                       cfg.sample_k, cfg.quantile_pool_budget, cfg.seed)


def write_meta(path, fields: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(fields):
            fh.write(f"{key} {fields[key]}\n")


def read_meta(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.strip().split(None, 1)
            if len(parts) == 2:
                out[parts[0]] = parts[1]
    return out


def cache_dir(cfg: RunConfig) -> Path:
    base = os.environ.get(CACHE_ENV)
    path = Path(base) if base else Path(cfg.out) / "cache"
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def load_run_dataset(cfg: RunConfig) -> Graph:
    if not cfg.edges:
        raise ConfigError("no edge file configured (key: edges)")
    return load_dataset(cfg.edges,
                        features_path=cfg.features or None,
                        labels_path=cfg.labels or None,
                        lcc=cfg.lcc)


def filtration_values(g: Graph, cfg: RunConfig):
    """Full-graph raw values plus the lift source tag, with caching for
    the curvature function."""
    if cfg.filtration == "degree":
        return curv.degree_values(g), "node"
    if cfg.filtration != "ricci":
        raise ConfigError(f"unknown filtration {cfg.filtration!r}")
    ghash = g.content_hash()
    path = cache_dir(cfg) / f"curvature_{ghash[:16]}_a{cfg.alpha!r}.tsv"
    if path.exists():
        cached_hash, cached_alpha, kappa = curv.read_curvature_cache(path)
        if cached_hash == ghash and cached_alpha == cfg.alpha:
            log.info("curvature cache hit: %s", path)
            return kappa, "edge"
        log.info("curvature cache stale, recomputing: %s", path)
    t0 = time.perf_counter()
    workers = 1 if cfg.reproducible else max(1, cfg.threads)
    kappa = curv.edge_curvatures(g, alpha=cfg.alpha, workers=workers)
    log.info("curvature computed for %d edges in %.2fs", len(kappa),
             time.perf_counter() - t0)
    curv.write_curvature_cache(path, ghash, cfg.alpha, kappa)
    return kappa, "edge"


def diagrams_for_graph(g: Graph, raw, source: str, radius: int):
    out = []
    for v in range(g.num_nodes):
        ego = ego_net(g, v, radius)
        fa = lift_values(ego, raw, source)
        out.append(persistence_diagram(sublevel_filtration(fa)))
    return out


def run_extract(cfg: RunConfig, g: Graph | None = None) -> Path:
    """Ego nets -> filtrations -> diagrams -> persistence images on disk."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if g is None:
        g = load_run_dataset(cfg)
    ghash = g.content_hash()
    ehash = extract_hash(cfg, ghash)
    store = out / "pi_store.bin"
    meta_path = out / "pi_store.bin.meta"
    if store.exists() and meta_path.exists():
        if read_meta(meta_path).get("config_hash") == ehash:
            log.info("image store up to date: %s", store)
            return store

    t0 = time.perf_counter()
    raw, source = filtration_values(g, cfg)
    diagrams = diagrams_for_graph(g, raw, source, cfg.radius)
    log.info("diagrams for %d nodes in %.2fs", g.num_nodes, time.perf_counter() - t0)

    try:
        spec = img.fit_normalization(diagrams)
    except NumericError:
        # single-valued filtration (all births equal): declared fallback
        # keeps essential points visible instead of failing the dataset
        vals = [float(pd.h0[0, 0]) for pd in diagrams if len(pd.h0)]
        if not vals:
            raise
        vmin = min(vals)
        log.warning("degenerate value range at %r; normalizing over [%r, %r]",
                    vmin, vmin, vmin + 1.0)
        spec = img.NormalizationSpec(global_min=vmin, global_max=vmin + 1.0)
    picfg = img.PIConfig(resolution=cfg.resolution,
                         sigma=None if cfg.sigma <= 0 else cfg.sigma)
    matrix = img.image_matrix(diagrams, spec, picfg)
    img.write_pi_store(store, matrix, picfg.resolution, picfg.effective_sigma)
    write_meta(meta_path, {
        "config_hash": ehash,
        "graph_hash": ghash,
        "filtration": cfg.filtration,
        "radius": cfg.radius,
        "alpha": repr(cfg.alpha),
        "resolution": repr(picfg.resolution),
        "sigma": repr(picfg.effective_sigma),
        "normalization_min": repr(spec.global_min),
        "normalization_max": repr(spec.global_max),
    })
    if cfg.dump_diagrams:
        with open(out / "diagrams.tsv", "w", encoding="utf-8") as fh:
            for v, pd in enumerate(diagrams):
                fh.write(f"# node {v}\n")
                fh.write(diagram_to_text(pd))
    log.info("extract done in %.2fs -> %s", time.perf_counter() - t0, store)
    return store


def _load_store_checked(cfg: RunConfig, g: Graph) -> np.ndarray:
    out = Path(cfg.out)
    store = out / "pi_store.bin"
    meta_path = out / "pi_store.bin.meta"
    if not store.exists() or not meta_path.exists():
        raise DataError(f"missing image store {store}; run extract first")
    meta = read_meta(meta_path)
    expect = extract_hash(cfg, g.content_hash())
    if meta.get("config_hash") != expect:
        raise DataError(
            f"stale image store {store}: config hash {meta.get('config_hash')} "
            f"does not match the current config ({expect}); rerun extract")
    matrix, _, _ = img.read_pi_store(store)
    return matrix.astype(np.float64)


def run_mine(cfg: RunConfig, g: Graph | None = None) -> Path:
    if g is None:
        g = load_run_dataset(cfg)
    matrix = _load_store_checked(cfg, g)
    ps = mine_mod.mine_positive_pairs(g, matrix, cfg.mining_config())
    path = Path(cfg.out) / "pairs.tsv"
    mine_mod.write_pairs(path, ps, header={
        "config_hash": mine_hash(cfg, g.content_hash()),
        "graph_hash": g.content_hash(),
        "strategy": cfg.candidate_strategy,
    })
    log.info("mined %d pairs (epsilon=%r) -> %s", len(ps), ps.epsilon_effective, path)
    return path


def _load_pairs_checked(cfg: RunConfig, g: Graph):
    path = Path(cfg.out) / "pairs.tsv"
    if not path.exists():
        raise DataError(f"missing pairs file {path}; run mine first")
    ps, meta = mine_mod.read_pairs(path)
    expect = mine_hash(cfg, g.content_hash())
    if meta.get("config_hash") != expect:
        raise DataError(
            f"stale pairs file {path}: config hash {meta.get('config_hash')} "
            f"does not match the current config ({expect}); rerun mine")
    return ps


def run_train(cfg: RunConfig, g: Graph | None = None, baseline: bool = False) -> dict:
    """Train (joint by default, plain GCN when baseline or lambda 0) and
    write metrics, loss curve, and a checkpoint."""
    if g is None:
        g = load_run_dataset(cfg)
    tcfg = cfg.train_config()
    pair_weights = None
    if baseline or tcfg.ssl_weight == 0:
        tcfg = dataclasses.replace(tcfg, ssl_weight=0.0)
        pairs = mine_mod.PositivePairSet(pairs=[], delta=cfg.delta, epsilon_effective=0.0)
    else:
        pairs = _load_pairs_checked(cfg, g)
        if tcfg.weight_pairs_by_distance and len(pairs) and \
                np.isfinite(pairs.epsilon_effective) and pairs.epsilon_effective > 0:
            eps = pairs.epsilon_effective
            pair_weights = np.maximum(0.0, (eps - pairs.distances()) / eps)
    masks = train_mod.make_splits(g.labels, cfg.seed, cfg.train_per_class,
                                  cfg.num_val, cfg.num_test)
    t0 = time.perf_counter()
    params, metrics = train_mod.joint_train(g, pairs, tcfg, masks=masks,
                                            pair_weights=pair_weights)
    log.info("trained %d epochs in %.2fs (test acc %.4f)", metrics.epochs_run,
             time.perf_counter() - t0, metrics.test_acc)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    suffix = "_baseline" if baseline else ""
    header = {"config_hash": mine_hash(cfg, g.content_hash()),
              "lambda": repr(tcfg.ssl_weight), "seed": cfg.seed}
    train_mod.write_metrics(out / f"metrics{suffix}.kv", metrics, header=header)
    train_mod.write_loss_curve(out / f"losses{suffix}.csv", metrics)
    train_mod.write_checkpoint(out / f"model{suffix}.bin", params)
    write_meta(out / f"model{suffix}.bin.meta", header)
    return {"metrics": metrics, "params": params}


def run_stats(cfg: RunConfig, g: Graph | None = None) -> Path:
    """Homophily plus the neighborhood-bias report, as table and key-value."""
    if g is None:
        g = load_run_dataset(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"nodes {g.num_nodes}", f"edges {g.num_edges}"]
    table = [f"nodes {g.num_nodes}, edges {g.num_edges}"]
    if g.labels is not None and g.num_edges:
        hom = homophily_index(g)
        lines.append(f"homophily {hom!r}")
        table.append(f"edge homophily {hom:.4f}")
    store = Path(cfg.out) / "pi_store.bin"
    if store.exists() and g.labels is not None:
        matrix = _load_store_checked(cfg, g)
        report = mine_mod.neighbor_bias_report(g, matrix, cfg.sample_budget, cfg.seed)
        lines.append(report.to_kv().rstrip("\n"))
        table.append("")
        table.append(report.format_table().rstrip("\n"))
        (out / "bias_report.kv").write_text(report.to_kv(), encoding="utf-8")
    path = out / "stats.kv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "stats_table.txt").write_text("\n".join(table) + "\n", encoding="utf-8")
    return path


def run_sweep(cfg: RunConfig, axis: str, values=None) -> Path:
    """Grid over one axis, reusing cached stages where hashes allow."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; have {sorted(SWEEP_AXES)}")
    values = SWEEP_AXES[axis] if values is None else values
    g = load_run_dataset(cfg)
    rows = []
    base_out = Path(cfg.out)
    # every sweep table leads with the plain backbone for comparison
    sub0 = dataclasses.replace(cfg, out=str(base_out / f"run_{axis}_original"))
    res0 = run_train(sub0, g, baseline=True)
    rows.append(("original", res0["metrics"]))
    for val in values:
        sub = dataclasses.replace(cfg, out=str(base_out / f"run_{axis}_{val}"))
        if axis == "delta":
            sub = dataclasses.replace(sub, delta=int(val))
        elif axis == "lambda":
            sub = dataclasses.replace(sub, ssl_weight=float(val))
        elif axis == "resolution":
            sub = dataclasses.replace(sub, resolution=float(val))
        elif axis == "filtration":
            sub = dataclasses.replace(sub, filtration=str(val))
        run_extract(sub, g)
        run_mine(sub, g)
        res = run_train(sub, g)
        rows.append((val, res["metrics"]))
        log.info("sweep %s=%s -> test acc %.4f", axis, val, res["metrics"].test_acc)
    table = base_out / f"sweep_{axis}.tsv"
    with open(table, "w", encoding="utf-8") as fh:
        fh.write(f"# sweep axis={axis} seed={cfg.seed}\n")
        fh.write("value\ttrain_acc\tval_acc\ttest_acc\tbest_epoch\n")
        for val, met in rows:
            fh.write(f"{val}\t{met.train_acc!r}\t{met.val_acc!r}\t"
                     f"{met.test_acc!r}\t{met.best_epoch}\n")
    # dataset x value grid, one dataset per run
    name = Path(cfg.edges).stem or "dataset"
    width = max(len(name), 8)
    header = "\t".join([f"{'dataset':<{width}}"] + [str(v) for v, _ in rows])
    cells = "\t".join([f"{name:<{width}}"] + [f"{met.test_acc * 100:.1f}"
                                              for _, met in rows])
    (base_out / f"sweep_{axis}_grid.txt").write_text(header + "\n" + cells + "\n",
                                                     encoding="utf-8")
    return table
