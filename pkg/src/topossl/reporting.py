"""Figure rendering for the report stage.

Each function takes artifacts already on disk and writes one PNG; the
report command collects whatever exists in the run directory and emits a
summary TSV next to the figures.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from . import images as img  # noqa: E402
from .persistence import diagram_from_text  # noqa: E402


def fig_images(store_path, out_path, nodes=(0, 1, 2, 3)) -> Path:
    """Heatmaps of H0/H1 image grids for a few nodes."""
    matrix, resolution, _ = img.read_pi_store(store_path)
    n = round(1.0 / resolution)
    nodes = [v for v in nodes if v < len(matrix)]
    fig, axes = plt.subplots(2, max(len(nodes), 1), figsize=(2.2 * len(nodes), 4.6),
                             squeeze=False)
    for col, v in enumerate(nodes):
        h0 = matrix[v][:n * n].reshape(n, n)
        h1 = matrix[v][n * n:].reshape(n, n)
        for row, grid in ((0, h0), (1, h1)):
            ax = axes[row][col]
            ax.imshow(grid.T, origin="lower", cmap="viridis",
                      extent=(0, 1, 0, 1), aspect="equal")
            ax.set_xticks([])
            ax.set_yticks([])
        axes[0][col].set_title(f"node {v}", fontsize=9)
    axes[0][0].set_ylabel("H0")
    axes[1][0].set_ylabel("H1")
    fig.suptitle("persistence images (birth x persistence)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def fig_diagrams(dump_path, out_path, max_nodes: int = 6) -> Path:
    """Scatter of the first few nodes' diagrams from a debug dump."""
    blocks: list[tuple[str, str]] = []
    current: list[str] = []
    name = ""
    for line in Path(dump_path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# node"):
            if current:
                blocks.append((name, "\n".join(current)))
                current = []
            name = line[1:].strip()
        else:
            current.append(line)
    if current:
        blocks.append((name, "\n".join(current)))
    blocks = blocks[:max_nodes]
    fig, axes = plt.subplots(1, max(len(blocks), 1), figsize=(2.6 * len(blocks), 2.8),
                             squeeze=False)
    for col, (label, text) in enumerate(blocks):
        h0, h1 = diagram_from_text(text)
        ax = axes[0][col]
        for arr, marker, lab in ((h0, "o", "H0"), (h1, "^", "H1")):
            if len(arr):
                finite = arr[:, 1].copy()
                cap = finite[~(finite == math.inf)]
                top = (cap.max() if cap.size else arr[:, 0].max()) + 1.0
                finite[finite == math.inf] = top
                ax.scatter(arr[:, 0], finite, marker=marker, s=18, label=lab)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("birth")
        if col == 0:
            ax.set_ylabel("death (inf capped)")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def fig_bias(kv_path, out_path) -> Path:
    """Per-hop same-label distance trend against the different-label mean."""
    kv = {}
    for line in Path(kv_path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if len(parts) == 2:
            kv[parts[0]] = parts[1]
    hops, vals = [], []
    for key, val in sorted(kv.items()):
        if key.startswith("positive_distance_hop_") and val != "nan":
            hops.append(int(key.rsplit("_", 1)[1]))
            vals.append(float(val))
    fig, ax = plt.subplots(figsize=(4.4, 3.2))
    ax.plot(hops, vals, marker="o", label="same label, hop >= h")
    neg = kv.get("negative_nonneighbor_distance")
    if neg and neg != "nan":
        ax.axhline(float(neg), color="tab:red", linestyle="--",
                   label="different label")
    ax.set_xlabel("minimum hop distance h")
    ax.set_ylabel("mean image distance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def fig_losses(csv_path, out_path) -> Path:
    epochs, task, ssl = [], [], []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            epochs.append(int(row["epoch"]))
            task.append(float(row["task_loss"]))
            ssl.append(float(row["ssl_loss"]))
    fig, ax = plt.subplots(figsize=(4.4, 3.2))
    ax.plot(epochs, task, label="task loss")
    if any(v != 0.0 for v in ssl):
        ax.plot(epochs, ssl, label="ssl loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def fig_sweep(tsv_path, out_path) -> Path:
    values, accs = [], []
    axis = "value"
    with open(tsv_path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                for part in line[1:].split():
                    if part.startswith("axis="):
                        axis = part.split("=", 1)[1]
                continue
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "value":
                continue
            values.append(parts[0])
            accs.append(float(parts[3]) * 100)
    fig, ax = plt.subplots(figsize=(4.4, 3.2))
    ax.plot(range(len(values)), accs, marker="s")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(values)
    ax.set_xlabel(axis)
    ax.set_ylabel("test accuracy (%)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_report(out_dir) -> Path:
    """Render every figure the run directory supports and index them."""
    out = Path(out_dir)
    figs = out / "figures"
    figs.mkdir(parents=True, exist_ok=True)
    rows = []
    store = out / "pi_store.bin"
    if store.exists():
        rows.append(("figure", str(fig_images(store, figs / "images.png"))))
    dump = out / "diagrams.tsv"
    if dump.exists():
        rows.append(("figure", str(fig_diagrams(dump, figs / "diagrams.png"))))
    bias = out / "bias_report.kv"
    if bias.exists():
        rows.append(("figure", str(fig_bias(bias, figs / "bias.png"))))
    for losses in sorted(out.glob("losses*.csv")):
        target = figs / (losses.stem + ".png")
        rows.append(("figure", str(fig_losses(losses, target))))
    for tsv in sorted(out.glob("sweep_*.tsv")):
        target = figs / (tsv.stem + ".png")
        rows.append(("figure", str(fig_sweep(tsv, target))))
    for kv_name in ("stats.kv", "bias_report.kv"):
        kv = out / kv_name
        if kv.exists():
            for line in kv.read_text(encoding="utf-8").splitlines():
                parts = line.split(None, 1)
                if len(parts) == 2 and not line.startswith("#"):
                    rows.append((parts[0], parts[1]))
    for metrics in sorted(out.glob("metrics*.kv")):
        for line in metrics.read_text(encoding="utf-8").splitlines():
            parts = line.split(None, 1)
            if len(parts) == 2 and not line.startswith("#"):
                rows.append((f"{metrics.stem}.{parts[0]}", parts[1]))
    summary = out / "report_summary.tsv"
    with open(summary, "w", encoding="utf-8") as fh:
        fh.write("key\tvalue\n")
        for key, val in rows:
            fh.write(f"{key}\t{val}\n")
    return summary
