"""Persistence images: normalization, exactness, stability, store format.

The quadrature oracle integrates the weighted Gaussian over each cell by
tensor Gauss-Legendre, sharing nothing with the erf-based production path.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import topossl as t
from topossl.images import INF_CAP
from conftest import connected_er_graph, image_matrix_for


def diagram(h0, h1=(), dropped=0):
    h0 = np.asarray(h0, dtype=np.float64).reshape(-1, 2)
    h1 = np.asarray(h1, dtype=np.float64).reshape(-1, 2)
    return t.PersistenceDiagram(h0=h0, h1=h1, zero_persistence_dropped=dropped,
                                num_vertices=len(h0) + dropped)


def gauss_legendre_pixel(b, p, w, x0, x1, y0, y1, sigma, nodes=24):
    """Oracle: integral of w * N((b,p), sigma^2 I) over [x0,x1] x [y0,y1]."""
    xs, wxs = np.polynomial.legendre.leggauss(nodes)
    gx = 0.5 * (x1 - x0) * xs + 0.5 * (x1 + x0)
    gy = 0.5 * (y1 - y0) * xs + 0.5 * (y1 + y0)
    fx = np.exp(-((gx - b) ** 2) / (2 * sigma**2))
    fy = np.exp(-((gy - p) ** 2) / (2 * sigma**2))
    ix = 0.5 * (x1 - x0) * (wxs @ fx)
    iy = 0.5 * (y1 - y0) * (wxs @ fy)
    return w * ix * iy / (2 * math.pi * sigma**2)


def oracle_image(points, spec, cfg):
    """Dense quadrature image of one layer of raw (birth, death) points."""
    n = cfg.cells_per_axis
    grid = np.zeros((n, n))
    edges = np.linspace(0.0, 1.0, n + 1)
    for braw, draw in points:
        b = float(spec.normalize(braw))
        d = INF_CAP if math.isinf(draw) else float(spec.normalize(draw))
        p = d - b
        w = max(p, 0.0)
        if w == 0.0:
            continue
        for i in range(n):
            for j in range(n):
                grid[i, j] += gauss_legendre_pixel(
                    b, p, w, edges[i], edges[i + 1], edges[j], edges[j + 1],
                    cfg.effective_sigma)
    return grid


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def test_fit_normalization_documented_cases():
    spec = t.fit_normalization([diagram([[-0.5, 0.2]], [[0.1, math.inf]]),
                                diagram([[0.0, 1.0]])])
    assert spec.global_min == -0.5 and spec.global_max == 1.0

    single = t.fit_normalization([diagram([[0.0, 1.0]])])
    assert (single.global_min, single.global_max) == (0.0, 1.0)

    with pytest.raises(t.NumericError):
        t.fit_normalization([diagram([[0.3, math.inf]])])
    with pytest.raises(t.DataError):
        t.fit_normalization([diagram(np.empty((0, 2)))])


def test_normalize_is_affine_onto_unit_interval():
    spec = t.NormalizationSpec(global_min=-1.0, global_max=3.0)
    assert spec.normalize(-1.0) == 0.0
    assert spec.normalize(3.0) == 1.0
    assert spec.normalize(1.0) == 0.5


def test_config_validation():
    assert t.PIConfig(resolution=0.1).cells_per_axis == 10
    assert t.PIConfig(resolution=0.05).vector_length == 800
    assert t.PIConfig(resolution=0.1).effective_sigma == 0.1
    assert t.PIConfig(resolution=0.1, sigma=0.2).effective_sigma == 0.2
    with pytest.raises(t.ConfigError):
        t.PIConfig(resolution=0.3)
    with pytest.raises(t.ConfigError):
        t.PIConfig(resolution=0.1, sigma=-1.0)
    with pytest.raises(t.ConfigError):
        t.PIConfig(resolution=0.1, weight="quadratic")


# ---------------------------------------------------------------------------
# image values
# ---------------------------------------------------------------------------

def test_empty_diagram_gives_zero_vector():
    spec = t.NormalizationSpec(0.0, 1.0)
    img = t.persistence_image(diagram(np.empty((0, 2))), spec, t.PIConfig(0.1))
    assert (img.pixels == 0).all()
    assert img.pixels.shape == (200,)


def test_single_point_matches_quadrature_oracle():
    spec = t.NormalizationSpec(0.0, 1.0)
    cfg = t.PIConfig(resolution=0.1)
    img = t.persistence_image(diagram([[0.5, 1.0]]), spec, cfg)
    want = oracle_image([(0.5, 1.0)], spec, cfg)
    assert np.abs(img.h0_grid() - want).max() <= 1e-6
    assert (img.h1_grid() == 0).all()


def test_multi_point_image_matches_quadrature_oracle():
    rng = np.random.default_rng(3)
    pts = np.sort(rng.uniform(-0.4, 0.9, size=(5, 2)), axis=1)
    pts = pts[pts[:, 1] - pts[:, 0] > 1e-3]
    pd = diagram(pts, [[float(pts[0, 0]), math.inf]])
    spec = t.fit_normalization([pd])
    cfg = t.PIConfig(resolution=0.1)
    img = t.persistence_image(pd, spec, cfg)
    assert np.abs(img.h0_grid() - oracle_image(pts, spec, cfg)).max() <= 1e-6
    assert np.abs(img.h1_grid()
                  - oracle_image([(float(pts[0, 0]), math.inf)], spec, cfg)).max() <= 1e-6


def test_essential_death_caps_at_one():
    spec = t.NormalizationSpec(0.0, 2.0)
    cfg = t.PIConfig(resolution=0.1)
    capped = t.persistence_image(diagram([[0.0, math.inf]]), spec, cfg)
    finite = t.persistence_image(diagram([[0.0, 2.0]]), spec, cfg)
    assert (capped.pixels == finite.pixels).all()


def test_grid_axes_are_birth_rows_persistence_columns():
    spec = t.NormalizationSpec(0.0, 1.0)
    cfg = t.PIConfig(resolution=0.1, sigma=0.03)
    img = t.persistence_image(diagram([[0.05, 1.0]]), spec, cfg)
    i, j = np.unravel_index(np.argmax(img.h0_grid()), (10, 10))
    assert (i, j) == (0, 9)  # birth 0.05 -> first row, persistence 0.95 -> last col


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_permutation_invariance_is_bitwise(seed):
    rng = np.random.default_rng(seed)
    pts = np.sort(rng.uniform(0.0, 1.0, size=(8, 2)), axis=1)
    pd = diagram(pts)
    shuffled = diagram(pts[rng.permutation(len(pts))])
    spec = t.NormalizationSpec(0.0, 1.0)
    cfg = t.PIConfig(resolution=0.1)
    a = t.persistence_image(pd, spec, cfg)
    b = t.persistence_image(shuffled, spec, cfg)
    assert (a.pixels == b.pixels).all()


def test_total_mass_accounting():
    """Image mass must equal the sum of weights times each Gaussian's
    in-square mass (2% contract; the erf construction is exact)."""
    rng = np.random.default_rng(7)
    pts = np.sort(rng.uniform(0.05, 0.95, size=(6, 2)), axis=1)
    pd = diagram(pts)
    spec = t.NormalizationSpec(0.0, 1.0)
    cfg = t.PIConfig(resolution=0.1)
    img = t.persistence_image(pd, spec, cfg)
    want = 0.0
    from scipy.special import erf
    denom = cfg.effective_sigma * math.sqrt(2)
    for b, d in pts:
        p = d - b
        mx = 0.5 * (erf((1 - b) / denom) - erf((0 - b) / denom))
        my = 0.5 * (erf((1 - p) / denom) - erf((0 - p) / denom))
        want += max(p, 0.0) * mx * my
    assert abs(img.pixels.sum() - want) <= 0.02 * want


def test_stability_trend_monotone_in_perturbation():
    g = connected_er_graph(30, 0.12, seed=2)
    matrix, diagrams = image_matrix_for(g, source="ricci", resolution=0.1)
    spec = t.fit_normalization(diagrams)
    cfg = t.PIConfig(resolution=0.1)
    rng = np.random.default_rng(0)
    direction = [rng.uniform(-1.0, 1.0, size=pd.h0.shape) for pd in diagrams]
    mean_shift = []
    for eta in (0.01, 0.02, 0.04):
        dists = []
        for pd, base, noise in zip(diagrams, matrix, direction):
            h0 = pd.h0 + eta * np.where(np.isfinite(pd.h0), noise, 0.0)
            moved = t.persistence_image(
                t.PersistenceDiagram(h0=h0, h1=pd.h1,
                                     zero_persistence_dropped=pd.zero_persistence_dropped,
                                     num_vertices=pd.num_vertices), spec, cfg)
            dists.append(np.linalg.norm(moved.pixels - base))
        mean_shift.append(np.mean(dists))
    assert mean_shift[0] < mean_shift[1] < mean_shift[2]


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------

def test_topo_distance_documented_cases():
    spec = t.NormalizationSpec(0.0, 1.0)
    cfg = t.PIConfig(resolution=0.1)
    a = t.persistence_image(diagram([[0.2, 0.9]]), spec, cfg)
    b = t.persistence_image(diagram([[0.3, 0.8]]), spec, cfg)
    zero = t.persistence_image(diagram(np.empty((0, 2))), spec, cfg)
    assert t.topo_distance(a, a) == 0.0
    assert t.topo_distance(zero, b) == float(np.linalg.norm(b.pixels))
    assert t.topo_distance(a, b) == t.topo_distance(b, a)


def test_topo_distance_triangle_inequality():
    rng = np.random.default_rng(5)
    spec = t.NormalizationSpec(0.0, 1.0)
    cfg = t.PIConfig(resolution=0.1)
    imgs = []
    for _ in range(6):
        pts = np.sort(rng.uniform(0, 1, size=(4, 2)), axis=1)
        imgs.append(t.persistence_image(diagram(pts), spec, cfg))
    for a in imgs:
        for b in imgs:
            for c in imgs:
                assert t.topo_distance(a, b) <= \
                    t.topo_distance(a, c) + t.topo_distance(c, b) + 1e-12


def test_topo_distance_rejects_mismatched_geometry():
    spec = t.NormalizationSpec(0.0, 1.0)
    a = t.persistence_image(diagram([[0.2, 0.9]]), spec, t.PIConfig(0.1))
    b = t.persistence_image(diagram([[0.2, 0.9]]), spec, t.PIConfig(0.05))
    with pytest.raises(t.DataError):
        t.topo_distance(a, b)


# ---------------------------------------------------------------------------
# store file
# ---------------------------------------------------------------------------

def test_pi_store_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    matrix = rng.random((5, 200)).astype(np.float32)
    path = tmp_path / "store.bin"
    t.write_pi_store(path, matrix, 0.1, 0.1)
    back, res, sigma = t.read_pi_store(path)
    assert (back == matrix).all()
    assert res == pytest.approx(0.1) and sigma == pytest.approx(0.1)
    t.write_pi_store(tmp_path / "again.bin", matrix, 0.1, 0.1)
    assert path.read_bytes() == (tmp_path / "again.bin").read_bytes()


def test_pi_store_rejects_corruption(tmp_path):
    path = tmp_path / "store.bin"
    t.write_pi_store(path, np.zeros((2, 8), dtype=np.float32), 0.5, 0.5)
    raw = path.read_bytes()
    (tmp_path / "bad_magic.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(t.DataError):
        t.read_pi_store(tmp_path / "bad_magic.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(t.DataError):
        t.read_pi_store(tmp_path / "short.bin")
