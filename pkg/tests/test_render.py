import hashlib

import numpy as np
import pytest

from sswc import prescription as rx
from sswc import raster, rowdetect as rd, synthfield as sf, weedmap as wm
from sswc.errors import InvalidInputError
from sswc.raster import BinaryMask, GeoTransform, Raster
from sswc.render import LINE_COLOR, NO_SPRAY_COLOR, WEED_COLOR, render_overlay
from sswc.rowdetect import RowLine

GOLDEN_SHA256 = "926adfe087c4f696bbb2d62afceba1a95db89d0eb2d7187c7da870b943639401"


def _base():
    geo = GeoTransform.north_up(0.5, 9.5, 1.0)
    arr = np.random.default_rng(0).integers(0, 200, (10, 12, 3), dtype=np.uint8)
    return Raster(arr, geo)


def test_no_layers_is_copy():
    r = _base()
    out = render_overlay(r)
    assert np.array_equal(out.samples, r.samples) and out.samples is not r.samples
    assert out.geo == r.geo


def test_line_pixels_only():
    r = _base()
    out = render_overlay(r, lines=[RowLine(0.5, 4.5, 11.5, 4.5)])
    changed = np.any(out.samples != r.samples, axis=2)
    painted = np.all(out.samples == LINE_COLOR, axis=2)
    assert np.array_equal(np.flatnonzero(painted.any(axis=1)), [5])
    assert painted[5].all()
    assert not np.any(changed & ~painted)


def test_weed_and_cells():
    r = _base()
    bits = np.zeros((10, 12), bool)
    bits[1, 1] = True
    weeds = BinaryMask(bits, r.geo)
    pm = rx.assign_rates(rx.build_grid((0, 0, 12, 10), rx.GridSpec(4, 5)), weeds)
    out = render_overlay(r, weeds=weeds, prescription=pm)
    assert tuple(out.samples[1, 1]) == WEED_COLOR
    # the cell containing the weed sprays, so its outline is untouched
    assert tuple(out.samples[0, 0]) != NO_SPRAY_COLOR
    assert tuple(out.samples[9, 11]) == NO_SPRAY_COLOR


def test_extent_mismatch():
    r = _base()
    with pytest.raises(InvalidInputError):
        render_overlay(r, lines=[RowLine(0.5, 4.5, 30.0, 4.5)])
    with pytest.raises(InvalidInputError):
        render_overlay(r, weeds=BinaryMask(np.zeros((10, 11), bool), r.geo))
    pm = rx.build_grid((0, 0, 20, 10))
    pm = rx.PrescriptionMap(pm.spec, pm.x_edges, pm.y_edges, rates=np.zeros(pm.shape))
    with pytest.raises(InvalidInputError):
        render_overlay(r, prescription=pm)


def golden_fixture():
    spec = sf.FieldSpec(width_m=4.0, height_m=3.0, gsd_m=0.01, weed_density_per_m2=1.5,
                        plant_dropout_prob=0.1, seed=21)
    rgb, _ = sf.generate(spec)
    m = raster.threshold_mask(raster.compute_exgi(rgb))
    lines = rd.detect_rows(m)
    zone = wm.buffer_rows(lines, wm.BufferSpec(), m.geo, m.width, m.height)
    weeds = wm.extract_weeds(m, zone)
    pm = rx.assign_rates(rx.build_grid(weeds.extent(), rx.GridSpec(0.5, 0.5)), weeds)
    return rgb, lines, weeds, pm


def test_golden_digest():
    img = render_overlay(*golden_fixture())
    assert hashlib.sha256(img.samples.tobytes()).hexdigest() == GOLDEN_SHA256
