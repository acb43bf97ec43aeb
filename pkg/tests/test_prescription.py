import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grid_geo, make_mask
from sswc import prescription as rx
from sswc.errors import FormatError, InvalidInputError
from sswc.prescription import GridSpec
from sswc.raster import BinaryMask, GeoTransform


def test_single_cell():
    pm = rx.build_grid((0, 0, 0.509, 3.048))
    assert pm.n_cells == 1


def test_plot_grid_3280():
    pm = rx.build_grid((0, 0, 41.64, 121.92))
    assert pm.shape == (40, 82) and pm.n_cells == 3280
    widths = np.diff(pm.x_edges)
    assert np.allclose(widths[:-1], 0.509)
    assert widths[-1] == pytest.approx(41.64 - 81 * 0.509)
    assert np.allclose(np.diff(pm.y_edges), 3.048)


def test_zero_area():
    with pytest.raises(InvalidInputError):
        rx.build_grid((0, 0, 0, 5))


def test_travel_axis_x_and_origin():
    pm = rx.build_grid((0, 0, 10, 2), GridSpec(0.5, 3.0, origin=(-1.0, 0.0), travel_axis="x"))
    assert pm.x_edges.tolist() == [0.0, 2.0, 5.0, 8.0, 10.0]
    assert pm.y_edges.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]


def _mask_for(extent, gsd, bits_fn=None, seed=0):
    xmin, ymin, xmax, ymax = extent
    w = int(round((xmax - xmin) / gsd))
    h = int(round((ymax - ymin) / gsd))
    geo = GeoTransform(xmin + 0.5 * gsd, ymax - 0.5 * gsd, gsd, -gsd)
    bits = np.zeros((h, w), bool) if bits_fn is None else bits_fn((h, w))
    return BinaryMask(bits, geo)


def test_assign_empty_and_full():
    ext = (0, 0, 2.0, 9.0)
    pm = rx.build_grid(ext)
    empty = rx.assign_rates(pm, _mask_for(ext, 0.05))
    assert (empty.rates == 0).all() and (empty.weed_pixels == 0).all()
    full = rx.assign_rates(pm, _mask_for(ext, 0.05, lambda s: np.ones(s, bool)))
    assert (full.rates == 140.3).all()


def test_boundary_pixel_single_owner():
    # pixel center exactly on the shared edge x = 1.0 belongs to the right-hand cell
    geo = GeoTransform(0.0, 1.5, 0.5, -0.5)
    bits = np.zeros((4, 5), bool)
    bits[2, 2] = True
    x, y = geo.pixel_to_world(2, 2)
    assert x == 1.0 and y == 0.5
    pm = rx.build_grid((0, -0.25, 2, 1.5), GridSpec(1.0, 0.75, origin=(0, -0.25)))
    out = rx.assign_rates(pm, BinaryMask(bits, geo))
    assert int((out.rates > 0).sum()) == 1
    r, c = np.argwhere(out.rates > 0)[0]
    cell = [cl for cl in out.cells() if (cl.row, cl.col) == (r, c)][0]
    assert cell.x0 == 1.0 and cell.contains(x, y)


def test_geo_mismatch():
    pm = rx.build_grid((0, 0, 10, 10))
    with pytest.raises(InvalidInputError):
        rx.assign_rates(pm, _mask_for((0, 0, 5, 10), 0.1))


def _brute(pm, mask):
    ys, xs = np.nonzero(mask.bits)
    pts = [mask.geo.pixel_to_world(c, r) for r, c in zip(ys, xs)]
    px = np.array([p[0] for p in pts])
    py = np.array([p[1] for p in pts])
    got = {}
    for cell in pm.cells():
        inside = (px >= cell.x0) & (px < cell.x1) & (py >= cell.y0) & (py < cell.y1)
        got[(cell.row, cell.col)] = int(inside.sum())
    return got


def random_instance(rng):
    h, w = rng.integers(1, 257, size=2)
    gsd = float(rng.choice([0.01, 0.0063, 0.05]))
    geo = GeoTransform(rng.uniform(-5, 5), rng.uniform(-5, 5), gsd, -gsd)
    bits = rng.random((h, w)) < rng.uniform(0, 0.01)
    mask = BinaryMask(bits, geo)
    ext = mask.extent()
    span_x, span_y = ext[2] - ext[0], ext[3] - ext[1]
    spec = GridSpec(span_x / rng.uniform(1, 15), span_y / rng.uniform(1, 15),
                    origin=(ext[0] - rng.uniform(0, 1), ext[1] - rng.uniform(0, 1)),
                    travel_axis=str(rng.choice(["x", "y"])))
    if spec.travel_axis == "x":
        spec = GridSpec(spec.cell_along_m, spec.cell_across_m, spec.origin, "x")
    return mask, spec


@pytest.mark.parametrize("seed", range(25))
def test_assign_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    mask, spec = random_instance(rng)
    pm = rx.assign_rates(rx.build_grid(mask.extent(), spec), mask)
    counts = _brute(pm, mask)
    for cell in pm.cells():
        assert cell.weed_pixels == counts[(cell.row, cell.col)]
        assert (cell.rate_l_per_ha > 0) == (counts[(cell.row, cell.col)] >= 1)
        assert cell.rate_l_per_ha in (0.0, 140.3)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tiling_and_monotonicity(seed):
    rng = np.random.default_rng(seed)
    mask, spec = random_instance(rng)
    pm = rx.build_grid(mask.extent(), spec)
    xmin, ymin, xmax, ymax = pm.extent
    assert pm.cell_areas().sum() == pytest.approx((xmax - xmin) * (ymax - ymin), rel=1e-6)
    assert (np.diff(pm.x_edges) > 0).all() and (np.diff(pm.y_edges) > 0).all()
    a = rx.assign_rates(pm, mask)
    more = BinaryMask(mask.bits | (rng.random(mask.bits.shape) < 0.01), mask.geo)
    b = rx.assign_rates(pm, more)
    assert not np.any((a.rates > 0) & (b.rates == 0))


def test_stats():
    pm = rx.build_grid((0, 0, 10, 10), GridSpec(1, 1))
    rates = np.full((10, 10), 140.3)
    rates.flat[:35] = 0
    s = rx.prescription_stats(pm.__class__(pm.spec, pm.x_edges, pm.y_edges, 140.3, rates))
    assert s.frac_no_spray == 0.35 and s.cells_no_spray == 35
    assert s.area_no_spray_m2 == pytest.approx(35.0)
    full = rx.prescription_stats(pm.__class__(pm.spec, pm.x_edges, pm.y_edges, 140.3,
                                              np.full((10, 10), 140.3)))
    assert full.frac_no_spray == 0


def test_stats_truncated_grid_oracle():
    rng = np.random.default_rng(2)
    mask = _mask_for((0, 0, 4.1, 7.3), 0.05, lambda s: rng.random(s) < 0.002)
    pm = rx.assign_rates(rx.build_grid(mask.extent()), mask)
    s = rx.prescription_stats(pm)
    no = sp = 0.0
    for cell in pm.cells():
        if cell.rate_l_per_ha == 0:
            no += cell.area_m2
        else:
            sp += cell.area_m2
    assert s.area_no_spray_m2 == pytest.approx(no, abs=1e-9)
    assert s.area_spray_m2 == pytest.approx(sp, abs=1e-9)
    assert s.cells_no_spray + s.cells_spray == s.cells_total
    assert s.area_no_spray_m2 + s.area_spray_m2 == pytest.approx(s.area_total_m2)


def _plot_map():
    rng = np.random.default_rng(9)
    mask = _mask_for((0, 0, 41.64, 121.92), 0.12, lambda s: rng.random(s) < 0.0005)
    return rx.assign_rates(rx.build_grid(mask.extent()), mask)


def test_export_import_roundtrip(tmp_path):
    pm = _plot_map()
    assert pm.n_cells == 3280
    p = tmp_path / "rx.geojson"
    rx.export_prescription(pm, p)
    back = rx.import_prescription(p)
    assert back.equals(pm)
    doc = json.loads(p.read_text())
    f0 = doc["features"][0]
    assert set(f0["properties"]) == {"rate_l_per_ha", "row", "col", "weed_pixels"}
    ring = f0["geometry"]["coordinates"][0]
    assert len(ring) == 5 and ring[0] == ring[-1]
    assert [(f["properties"]["row"], f["properties"]["col"]) for f in doc["features"][:3]] == \
        [(0, 0), (0, 1), (0, 2)]
    assert "crs" in doc


def _doc(tmp_path, mutate):
    pm = rx.assign_rates(rx.build_grid((0, 0, 2, 2), GridSpec(1, 1)),
                         _mask_for((0, 0, 2, 2), 0.5, lambda s: np.eye(*s, dtype=bool)))
    p = tmp_path / "rx.geojson"
    rx.export_prescription(pm, p)
    doc = json.loads(p.read_text())
    mutate(doc)
    p.write_text(json.dumps(doc))
    return p


@pytest.mark.parametrize("mutate, match", [
    (lambda d: d["features"][1]["properties"].update(rate_l_per_ha=-1.0), "negative"),
    (lambda d: d.update(features=[]), "no features"),
    (lambda d: d["features"].pop(), "grid"),
    (lambda d: d["features"][0]["properties"].update(row="a"), "row"),
    (lambda d: d["features"][0]["geometry"]["coordinates"][0].pop(), "5 positions"),
    (lambda d: d["features"][2]["geometry"].update(coordinates=[[[0, 1], [1, 2], [1, 1], [0, 2], [0, 1]]]),
     "cross"),
])
def test_import_errors(tmp_path, mutate, match):
    with pytest.raises(FormatError, match=match):
        rx.import_prescription(_doc(tmp_path, mutate))


def test_import_malformed_json(tmp_path):
    p = tmp_path / "bad.geojson"
    p.write_text('{"type": "FeatureCollection",\n "features": [}')
    with pytest.raises(FormatError, match="2"):
        rx.import_prescription(p)


def test_export_requires_rates(tmp_path):
    with pytest.raises(InvalidInputError):
        rx.export_prescription(rx.build_grid((0, 0, 1, 1)), tmp_path / "x.geojson")
