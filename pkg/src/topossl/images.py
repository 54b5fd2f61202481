"""Persistence images and the topological distance between nodes.

Diagrams are first normalized with one global affine map fitted over the
whole dataset, essential deaths are capped at 1.0 in normalized
coordinates, and each point lands in the (birth, persistence) plane with a
weight linear in persistence. A pixel's value is the exact integral of the
weighted normalized Gaussian over that cell (erf closed form), so images
are permutation invariant by construction and match quadrature to machine
precision. H0 and H1 get separate grids; the vector is their row-major
concatenation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ConfigError, DataError, NumericError
from .persistence import PersistenceDiagram

PI_STORE_MAGIC = b"TPIS"
INF_CAP = 1.0


@dataclass(frozen=True)
class NormalizationSpec:
    """Global affine map sending observed finite values onto [0, 1]."""

    global_min: float
    global_max: float
    inf_cap: float = INF_CAP

    def __post_init__(self):
        if not (self.global_max > self.global_min):
            raise NumericError(
                f"zero value range: [{self.global_min}, {self.global_max}]")

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.global_min) / (
            self.global_max - self.global_min)


def fit_normalization(diagrams) -> NormalizationSpec:
    """Fit the global min/max over all finite births and deaths."""
    vals = []
    for pd in diagrams:
        for arr in (pd.h0, pd.h1):
            if len(arr):
                finite = arr[np.isfinite(arr)]
                if finite.size:
                    vals.append(finite)
    if not vals:
        raise DataError("no finite persistence values to normalize")
    allv = np.concatenate(vals)
    return NormalizationSpec(global_min=float(allv.min()), global_max=float(allv.max()))


@dataclass(frozen=True)
class PIConfig:
    """Grid geometry: resolution is the cell size on [0, 1], so 1/resolution
    must be an integer; sigma defaults to one cell."""

    resolution: float = 0.05
    sigma: float | None = None
    weight: str = "linear"

    def __post_init__(self):
        n = round(1.0 / self.resolution)
        if n < 1 or abs(n * self.resolution - 1.0) > 1e-9:
            raise ConfigError(f"1/resolution must be an integer, got {self.resolution}")
        if self.weight != "linear":
            raise ConfigError(f"unknown weight kind {self.weight!r}")
        if self.sigma is not None and self.sigma <= 0:
            raise ConfigError("sigma must be positive")

    @property
    def cells_per_axis(self) -> int:
        return round(1.0 / self.resolution)

    @property
    def effective_sigma(self) -> float:
        return self.resolution if self.sigma is None else self.sigma

    @property
    def vector_length(self) -> int:
        n = self.cells_per_axis
        return 2 * n * n


@dataclass(frozen=True)
class PersistenceImage:
    """Flat image vector: H0 grid then H1 grid, each row-major with the
    birth axis as rows and the persistence axis as columns."""

    pixels: np.ndarray
    resolution: float
    sigma: float

    @property
    def cells_per_axis(self) -> int:
        return round(1.0 / self.resolution)

    def h0_grid(self) -> np.ndarray:
        n = self.cells_per_axis
        return self.pixels[:n * n].reshape(n, n)

    def h1_grid(self) -> np.ndarray:
        n = self.cells_per_axis
        return self.pixels[n * n:].reshape(n, n)


def _grid_layer(points: np.ndarray, spec: NormalizationSpec, cfg: PIConfig) -> np.ndarray:
    """Accumulate one homology layer onto its grid.

    points is (k, 2) raw (birth, death) with death possibly inf. Points are
    sorted before accumulation so any input permutation produces the
    identical float result.
    """
    n = cfg.cells_per_axis
    grid = np.zeros((n, n), dtype=np.float64)
    if len(points) == 0:
        return grid
    births = spec.normalize(points[:, 0])
    deaths = np.where(np.isinf(points[:, 1]), spec.inf_cap, spec.normalize(points[:, 1]))
    pers = deaths - births
    order = np.lexsort((pers, births))
    births, pers = births[order], pers[order]
    edges = np.linspace(0.0, 1.0, n + 1)
    denom = cfg.effective_sigma * np.sqrt(2.0)
    for b, p in zip(births, pers):
        w = max(float(p), 0.0)
        if w == 0.0:
            continue
        ix = 0.5 * (erf((edges[1:] - b) / denom) - erf((edges[:-1] - b) / denom))
        iy = 0.5 * (erf((edges[1:] - p) / denom) - erf((edges[:-1] - p) / denom))
        grid += w * np.outer(ix, iy)
    return grid


def persistence_image(pd: PersistenceDiagram, spec: NormalizationSpec,
                      cfg: PIConfig) -> PersistenceImage:
    """Vectorize one diagram under a shared normalization and grid."""
    h0 = _grid_layer(pd.h0, spec, cfg)
    h1 = _grid_layer(pd.h1, spec, cfg)
    pixels = np.concatenate([h0.reshape(-1), h1.reshape(-1)])
    return PersistenceImage(pixels=pixels, resolution=cfg.resolution,
                            sigma=cfg.effective_sigma)


def image_matrix(diagrams, spec: NormalizationSpec, cfg: PIConfig) -> np.ndarray:
    """Stack per-node image vectors into a (num_nodes, vector_length) matrix."""
    out = np.empty((len(diagrams), cfg.vector_length), dtype=np.float64)
    for i, pd in enumerate(diagrams):
        out[i] = persistence_image(pd, spec, cfg).pixels
    return out


def topo_distance(a: PersistenceImage, b: PersistenceImage) -> float:
    """Euclidean distance between two image vectors of matching geometry."""
    if a.pixels.shape != b.pixels.shape or a.resolution != b.resolution:
        raise DataError("persistence images have mismatched geometry")
    return float(np.linalg.norm(a.pixels - b.pixels))


# ---------------------------------------------------------------------------
# image store file
# ---------------------------------------------------------------------------

def write_pi_store(path, matrix: np.ndarray, resolution: float, sigma: float) -> None:
    """Binary store: magic TPIS, u64 num_nodes, u64 vec_len, f32 resolution,
    f32 sigma, then float32 rows in node order."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise DataError("image matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(PI_STORE_MAGIC)
        fh.write(struct.pack("<QQff", matrix.shape[0], matrix.shape[1],
                             float(resolution), float(sigma)))
        matrix.tofile(fh)


def read_pi_store(path) -> tuple[np.ndarray, float, float]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PI_STORE_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {PI_STORE_MAGIC!r}")
        header = fh.read(24)
        if len(header) != 24:
            raise DataError(f"{path}: truncated header")
        num_nodes, vec_len, resolution, sigma = struct.unpack("<QQff", header)
        data = np.fromfile(fh, dtype="<f4", count=num_nodes * vec_len)
    if data.size != num_nodes * vec_len:
        raise DataError(f"{path}: expected {num_nodes * vec_len} floats, found {data.size}")
    return data.reshape(num_nodes, vec_len), float(resolution), float(sigma)
