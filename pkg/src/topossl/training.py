"""Two-layer graph convolution trained jointly with a contrastive loss.

Forward pass: H = relu(A_hat X W1), logits = A_hat H W2 with the usual
renormalized propagation A_hat = D^-1/2 (A + I) D^-1/2. The objective is
masked cross entropy plus lambda times an InfoNCE loss over mined positive
pairs on the row-normalized hidden embeddings, plus L2 on W1. Gradients
are written out by hand (no autograd anywhere) and Adam does the updates;
the finite-difference check in the test suite holds both derivations to
each other.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, NumericError
from .graph import Graph

CHECKPOINT_MAGIC = b"TGCN"

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8
_LOSS_IMPROVEMENT = 1e-5
_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 16
    ssl_weight: float = 0.1     # lambda in the joint objective
    tau: float = 0.5
    epochs: int = 1000
    patience: int = 200
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    negatives_per_pair: int = 10
    ssl_mode: str = "infonce"   # or "single_negative" (one sampled negative)
    weight_pairs_by_distance: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be positive")
        if self.ssl_weight < 0:
            raise ConfigError("ssl weight must be nonnegative")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.epochs < 1 or self.patience < 1:
            raise ConfigError("epochs and patience must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.negatives_per_pair < 0:
            raise ConfigError("negatives_per_pair must be nonnegative")
        if self.ssl_mode not in ("infonce", "single_negative"):
            raise ConfigError(f"unknown ssl mode {self.ssl_mode!r}")


@dataclass
class ModelParams:
    w1: np.ndarray
    w2: np.ndarray

    def copy(self) -> "ModelParams":
        return ModelParams(self.w1.copy(), self.w2.copy())


@dataclass
class Metrics:
    train_acc: float
    val_acc: float
    test_acc: float
    best_epoch: int
    epochs_run: int
    loss_curve: list = field(default_factory=list)  # (task_loss, ssl_loss) per epoch


def normalize_adjacency(g: Graph):
    """Sparse A_hat = D^-1/2 (A + I) D^-1/2; isolated nodes keep a unit
    self loop."""
    n = g.num_nodes
    edges = g.edges_array()
    rows = np.concatenate([edges[:, 0], edges[:, 1], np.arange(n)])
    cols = np.concatenate([edges[:, 1], edges[:, 0], np.arange(n)])
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    dinv = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    return sp.csr_matrix(a.multiply(dinv[:, None]).multiply(dinv[None, :]))


def init_params(in_dim: int, hidden_dim: int, num_classes: int, seed: int) -> ModelParams:
    """Glorot-uniform init, float64 throughout."""
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return ModelParams(w1=glorot(in_dim, hidden_dim), w2=glorot(hidden_dim, num_classes))


def forward(params: ModelParams, prop, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (hidden embeddings, logits)."""
    z1 = (prop @ x) @ params.w1
    h = np.maximum(z1, 0.0)
    logits = (prop @ h) @ params.w2
    return h, logits


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray):
    """Masked mean CE and its gradient w.r.t. logits."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise DataError("empty mask for cross entropy")
    p = _softmax(logits[idx])
    picked = p[np.arange(len(idx)), labels[idx]]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    grad = np.zeros_like(logits)
    g = p.copy()
    g[np.arange(len(idx)), labels[idx]] -= 1.0
    grad[idx] = g / len(idx)
    return loss, grad


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return float("nan")
    return float((logits[idx].argmax(axis=1) == labels[idx]).mean())


def _row_normalize(h: np.ndarray):
    norms = np.sqrt((h * h).sum(axis=1))
    safe = np.maximum(norms, _NORM_FLOOR)
    return h / safe[:, None], safe


def ssl_loss(embeddings: np.ndarray, pairs, negatives: np.ndarray, tau: float = 0.5,
             mode: str = "infonce", pair_weights=None) -> float:
    """Contrastive loss over positive pairs; see _ssl_loss_grad for terms."""
    loss, _ = _ssl_loss_grad(embeddings, _pairs_array(pairs), negatives, tau,
                             mode, pair_weights)
    return loss


def _pairs_array(pairs) -> np.ndarray:
    if hasattr(pairs, "as_array"):
        return pairs.as_array()
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def _ssl_loss_grad(h: np.ndarray, pairs: np.ndarray, negatives: np.ndarray,
                   tau: float, mode: str, pair_weights):
    """Loss and d loss / d h (raw embeddings, pre normalization).

    infonce: mean over pairs of -log exp(s_uv / tau) / (exp(s_uv / tau)
    + sum_w exp(s_uw / tau)) with scores on L2-normalized rows. Zero
    negatives make a pair's term vanish. single_negative uses only the
    first sampled negative: (s_uw - s_uv) / tau. Batched over pairs; the
    scatter-adds handle nodes appearing in many pairs.
    """
    if len(pairs) == 0:
        warnings.warn("ssl loss over an empty pair set is 0", stacklevel=2)
        return 0.0, np.zeros_like(h)
    hn, safe = _row_normalize(h)
    dhn = np.zeros_like(hn)
    npairs = len(pairs)
    u, v = pairs[:, 0], pairs[:, 1]
    wgt = (np.ones(npairs) if pair_weights is None
           else np.asarray(pair_weights, dtype=np.float64))
    hu, hv = hn[u], hn[v]
    s_pos = (hu * hv).sum(axis=1)
    have_negs = negatives is not None and negatives.size > 0

    if mode == "single_negative":
        if not have_negs:
            return 0.0, np.zeros_like(h)
        w = negatives[:, 0]
        hw = hn[w]
        s_neg = (hu * hw).sum(axis=1)
        total = float((wgt * (s_neg - s_pos)).sum() / tau)
        np.add.at(dhn, u, (wgt / tau)[:, None] * (hw - hv))
        np.add.at(dhn, v, (-wgt / tau)[:, None] * hu)
        np.add.at(dhn, w, (wgt / tau)[:, None] * hu)
    else:
        if have_negs:
            hw = hn[negatives]                              # (P, K, d)
            s_neg = np.einsum("pd,pkd->pk", hu, hw)
            scores = np.concatenate([s_pos[:, None], s_neg], axis=1)
        else:
            scores = s_pos[:, None]
        z = scores / tau
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        esum = e.sum(axis=1)
        total = float((wgt * -(z[:, 0] - np.log(esum))).sum())
        ds = wgt[:, None] * (e / esum[:, None]) / tau
        ds[:, 0] -= wgt / tau
        dhn_u = ds[:, 0, None] * hv
        if have_negs:
            dhn_u += np.einsum("pk,pkd->pd", ds[:, 1:], hw)
            flat = (ds[:, 1:, None] * hu[:, None, :]).reshape(-1, hn.shape[1])
            np.add.at(dhn, negatives.ravel(), flat)
        np.add.at(dhn, u, dhn_u)
        np.add.at(dhn, v, ds[:, 0, None] * hu)

    total /= npairs
    dhn /= npairs
    # back through row normalization: dh = (dhn - hn <hn, dhn>) / ||h||
    inner = (hn * dhn).sum(axis=1, keepdims=True)
    dh = (dhn - hn * inner) / safe[:, None]
    return total, dh


class _NegativeSampler:
    """Per-pair candidate tables, built once so per-epoch draws are a
    single indexed gather."""

    def __init__(self, g: Graph, pairs: np.ndarray):
        pairs = _pairs_array(pairs)
        n = g.num_nodes
        rows = []
        for u, v in pairs:
            excl = np.zeros(n, dtype=bool)
            excl[g.neighbors(int(u))] = True
            excl[int(u)] = excl[int(v)] = True
            cand = np.flatnonzero(~excl)
            if cand.size == 0:
                raise DataError(f"no negative candidates for pair ({u}, {v})")
            rows.append(cand)
        self.lengths = np.array([len(r) for r in rows], dtype=np.int64)
        self.table = np.zeros((len(rows), int(self.lengths.max(initial=1))),
                              dtype=np.int64)
        for i, r in enumerate(rows):
            self.table[i, :len(r)] = r

    def draw(self, k: int, rng: np.random.Generator) -> np.ndarray:
        num = len(self.lengths)
        if k == 0 or num == 0:
            return np.empty((num, k), dtype=np.int64)
        idx = rng.integers(0, self.lengths[:, None], size=(num, k))
        return np.take_along_axis(self.table, idx, axis=1)


def sample_negatives(g: Graph, pairs: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """(num_pairs, k) negatives per pair, uniform over nodes excluding u, v
    and the neighbors of u. Draws are with replacement."""
    pairs = _pairs_array(pairs)
    if len(pairs) == 0:
        return np.empty((0, k), dtype=np.int64)
    return _NegativeSampler(g, pairs).draw(k, rng)


def joint_loss_and_grad(params: ModelParams, prop, x_prop: np.ndarray,
                        labels: np.ndarray, train_mask: np.ndarray,
                        pairs: np.ndarray, negatives: np.ndarray,
                        cfg: TrainConfig, pair_weights=None):
    """Total objective and analytic gradients at the current params.

    x_prop is the precomputed prop @ X (features never change during a
    run). Returns (total, task, ssl, dW1, dW2).
    """
    z1 = x_prop @ params.w1
    h = np.maximum(z1, 0.0)
    m = prop @ h
    logits = m @ params.w2

    task, dlogits = cross_entropy(logits, labels, train_mask)
    if cfg.ssl_weight > 0 and len(pairs):
        ssl, dh_ssl = _ssl_loss_grad(h, pairs, negatives, cfg.tau, cfg.ssl_mode,
                                     pair_weights)
    else:
        ssl, dh_ssl = 0.0, None

    reg = 0.5 * cfg.weight_decay * float((params.w1 * params.w1).sum())
    total = task + cfg.ssl_weight * ssl + reg

    dw2 = m.T @ dlogits
    dh = prop.T @ (dlogits @ params.w2.T)
    if dh_ssl is not None:
        dh = dh + cfg.ssl_weight * dh_ssl
    dz1 = dh * (z1 > 0.0)
    dw1 = x_prop.T @ dz1 + cfg.weight_decay * params.w1
    return total, task, ssl, dw1, dw2


def make_splits(labels: np.ndarray, seed: int, train_per_class: int = 20,
                num_val: int = 500, num_test: int = 1000):
    """Seeded class-balanced train mask plus disjoint val/test masks."""
    n = len(labels)
    rng = np.random.default_rng(seed)
    train = np.zeros(n, dtype=bool)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if len(members) < train_per_class:
            raise DataError(
                f"class {cls} has {len(members)} nodes, fewer than "
                f"train_per_class={train_per_class}")
        train[rng.choice(members, size=train_per_class, replace=False)] = True
    rest = np.flatnonzero(~train)
    if len(rest) < num_val + num_test:
        raise DataError(
            f"need {num_val + num_test} val+test nodes, only {len(rest)} left")
    rest = rng.permutation(rest)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    val[rest[:num_val]] = True
    test[rest[num_val:num_val + num_test]] = True
    return train, val, test


class _Adam:
    def __init__(self, shapes, lr):
        self.lr = lr
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params: list, grads: list):
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = _ADAM_B1 * self.m[i] + (1 - _ADAM_B1) * g
            self.v[i] = _ADAM_B2 * self.v[i] + (1 - _ADAM_B2) * (g * g)
            mhat = self.m[i] / (1 - _ADAM_B1 ** self.t)
            vhat = self.v[i] / (1 - _ADAM_B2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + _ADAM_EPS)


def joint_train(g: Graph, pairs, cfg: TrainConfig, masks=None,
                pair_weights=None) -> tuple[ModelParams, Metrics]:
    """Full training loop; returns the params snapshot at best val accuracy.

    With ssl_weight zero (or no pairs) the run is the plain GCN baseline,
    bit for bit: the contrastive branch is skipped entirely, including its
    negative sampling, so the RNG stream is untouched.
    """
    if g.features is None or g.labels is None:
        raise DataError("training needs features and labels")
    labels = g.labels
    num_classes = int(labels.max()) + 1
    x = g.features.astype(np.float64)
    prop = normalize_adjacency(g)
    x_prop = prop @ x

    if masks is None:
        masks = make_splits(labels, cfg.seed)
    train_mask, val_mask, test_mask = masks
    if not train_mask.any():
        raise DataError("empty train mask")

    pair_arr = _pairs_array(pairs) if pairs is not None else np.empty((0, 2), np.int64)
    ss = np.random.SeedSequence(cfg.seed)
    init_seed, neg_seed = ss.spawn(2)
    params = init_params(x.shape[1], cfg.hidden_dim, num_classes,
                         np.random.default_rng(init_seed).integers(2 ** 31))
    neg_rng = np.random.default_rng(neg_seed)
    opt = _Adam([params.w1.shape, params.w2.shape], cfg.learning_rate)

    use_ssl = cfg.ssl_weight > 0 and len(pair_arr) > 0
    sampler = _NegativeSampler(g, pair_arr) if use_ssl else None
    track_val = bool(val_mask.any())
    best_val = -1.0
    best = params.copy()
    best_epoch = 0
    best_loss = np.inf
    stall = 0
    curve = []
    epochs_run = 0

    def eval_logits(p):
        return (prop @ np.maximum(x_prop @ p.w1, 0.0)) @ p.w2

    for epoch in range(1, cfg.epochs + 1):
        negatives = (sampler.draw(cfg.negatives_per_pair, neg_rng)
                     if use_ssl else np.empty((0, 0), np.int64))
        total, task, ssl_val, dw1, dw2 = joint_loss_and_grad(
            params, prop, x_prop, labels, train_mask, pair_arr, negatives, cfg,
            pair_weights)
        if not np.isfinite(total):
            raise NumericError(f"non-finite loss at epoch {epoch}")
        opt.step([params.w1, params.w2], [dw1, dw2])
        curve.append((task, ssl_val))
        epochs_run = epoch

        if track_val:
            val_acc = accuracy(eval_logits(params), labels, val_mask)
            if val_acc > best_val:
                best_val = val_acc
                best = params.copy()
                best_epoch = epoch
        improved = total < best_loss - _LOSS_IMPROVEMENT
        if not track_val and (improved or epoch == 1):
            best = params.copy()
            best_epoch = epoch
        if improved:
            best_loss = total
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break

    logits = eval_logits(best)
    metrics = Metrics(
        train_acc=accuracy(logits, labels, train_mask),
        val_acc=accuracy(logits, labels, val_mask),
        test_acc=accuracy(logits, labels, test_mask),
        best_epoch=best_epoch,
        epochs_run=epochs_run,
        loss_curve=curve)
    return best, metrics


# ---------------------------------------------------------------------------
# checkpoint and metrics files
# ---------------------------------------------------------------------------

def write_checkpoint(path, params: ModelParams) -> None:
    """Binary checkpoint: magic TGCN, u64 dims, float32 weights."""
    w1 = np.ascontiguousarray(params.w1, dtype="<f4")
    w2 = np.ascontiguousarray(params.w2, dtype="<f4")
    if w1.shape[1] != w2.shape[0]:
        raise DataError("weight shapes are inconsistent")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<QQQ", w1.shape[0], w1.shape[1], w2.shape[1]))
        w1.tofile(fh)
        w2.tofile(fh)


def read_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        header = fh.read(24)
        if len(header) != 24:
            raise DataError(f"{path}: truncated header")
        in_dim, hidden, classes = struct.unpack("<QQQ", header)
        w1 = np.fromfile(fh, dtype="<f4", count=in_dim * hidden)
        w2 = np.fromfile(fh, dtype="<f4", count=hidden * classes)
    if w1.size != in_dim * hidden or w2.size != hidden * classes:
        raise DataError(f"{path}: truncated weights")
    return ModelParams(w1=w1.reshape(in_dim, hidden).astype(np.float64),
                       w2=w2.reshape(hidden, classes).astype(np.float64))


def write_metrics(path, metrics: Metrics, header: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(header or {}):
            fh.write(f"# {key}={header[key]}\n")
        fh.write(f"train_acc {metrics.train_acc!r}\n")
        fh.write(f"val_acc {metrics.val_acc!r}\n")
        fh.write(f"test_acc {metrics.test_acc!r}\n")
        fh.write(f"best_epoch {metrics.best_epoch}\n")
        fh.write(f"epochs_run {metrics.epochs_run}\n")


def write_loss_curve(path, metrics: Metrics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,task_loss,ssl_loss\n")
        for i, (task, ssl_val) in enumerate(metrics.loss_curve, start=1):
            fh.write(f"{i},{task!r},{ssl_val!r}\n")
