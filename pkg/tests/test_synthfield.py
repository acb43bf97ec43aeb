import numpy as np
import pytest

from sswc import raster, synthfield as sf
from sswc.errors import InvalidInputError
from sswc.synthfield import FieldSpec

SMALL = dict(width_m=6.0, height_m=4.0, gsd_m=0.01)


def test_thirteen_rows():
    spec = FieldSpec(width_m=10, height_m=10, gsd_m=0.05)
    _, truth = sf.generate(spec)
    assert len(truth.row_lines) == 13
    ys = [ln.position for ln in truth.row_lines]
    assert ys[0] == pytest.approx(0.381)
    assert np.allclose(np.diff(ys), 0.762)


def test_too_small():
    with pytest.raises(InvalidInputError):
        sf.generate(FieldSpec(width_m=5, height_m=0.5))


def test_deterministic():
    spec = FieldSpec(**SMALL, weed_density_per_m2=2, plant_dropout_prob=0.3,
                     row_wobble_amplitude_px=2, seed=17)
    a, ta = sf.generate(spec)
    b, tb = sf.generate(spec)
    assert np.array_equal(a.samples, b.samples) and a.geo == b.geo
    assert np.array_equal(ta.weeds, tb.weeds) and ta.row_lines == tb.row_lines
    c, _ = sf.generate(FieldSpec(**{**spec.__dict__, "seed": 18}))
    assert not np.array_equal(a.samples, c.samples)


def test_seed_stability_fingerprint():
    # frozen once from a reviewed run; guards against silent stream changes
    spec = FieldSpec(**SMALL, weed_density_per_m2=1.0, seed=5)
    _, truth = sf.generate(spec)
    assert sf._Uniforms(5)(3).tolist() == [0.8050029237453802, 0.8079407897364937, 0.515325561042142]
    assert truth.weeds.shape[1] == 3


def test_weed_free_mask_near_rows():
    spec = FieldSpec(**SMALL)
    rgb, truth = sf.generate(spec)
    m = raster.threshold_mask(raster.compute_exgi(rgb), 0.08)
    r, c = np.nonzero(m.bits)
    x, y = rgb.geo.pixel_to_world(c, r)
    ys = np.array([ln.position for ln in truth.row_lines])
    dist = np.min(np.abs(y[:, None] - ys[None, :]), axis=1)
    assert dist.max() <= 0.5 * spec.plant_diameter_m + 1e-9


@pytest.mark.parametrize("palette", ["easy", "hard"])
def test_oracle_validity(palette):
    spec = FieldSpec(**SMALL, weed_density_per_m2=3, plant_dropout_prob=0.2, palette=palette, seed=2)
    rgb, _, plants, weeds = sf.generate_with_masks(spec)
    m = raster.threshold_mask(raster.compute_exgi(rgb), 0.08)
    assert np.array_equal(m.bits, plants | weeds)


def test_palette_margins():
    def exgi(c):
        return float(raster.exgi_from_bands(*c))
    easy, hard = sf.PALETTES["easy"], sf.PALETTES["hard"]
    assert exgi(easy["plant"]) >= 0.3 and exgi(easy["soil"]) <= 0.0
    assert exgi(hard["plant"]) - 0.08 >= 0.02 - 1e-12 and 0.08 - exgi(hard["soil"]) >= 0.02 - 1e-12


def test_weed_placement():
    spec = FieldSpec(**SMALL, weed_density_per_m2=20, row_wobble_amplitude_px=3, seed=4)
    _, truth = sf.generate(spec)
    assert len(truth.weeds) > 0
    ys = np.array([ln.position for ln in truth.row_lines])
    wobble = spec.row_wobble_amplitude_px * spec.gsd_m
    for x, y, r in truth.weeds:
        assert np.min(np.abs(ys - y)) >= spec.buffer_half_width_m + r
        assert 0 <= x <= spec.width_m and 0 <= y <= spec.height_m
        assert spec.weed_diameter_min_m / 2 <= r <= spec.weed_diameter_max_m / 2
    assert wobble > 0


def test_truth_files_roundtrip(tmp_path):
    spec = FieldSpec(width_m=10, height_m=10, gsd_m=0.05, weed_density_per_m2=1, seed=1)
    _, truth = sf.generate(spec)
    rows, weeds = tmp_path / "rows.csv", tmp_path / "weeds.csv"
    sf.truth_to_files(truth, rows, weeds)
    assert len(rows.read_text().splitlines()) == 14
    back = sf.read_truth(rows, weeds)
    assert back.row_lines == truth.row_lines
    np.testing.assert_array_equal(back.weeds, truth.weeds)


def test_truth_files_empty(tmp_path):
    t = sf.GroundTruth([])
    sf.truth_to_files(t, tmp_path / "r.csv", tmp_path / "w.csv")
    back = sf.read_truth(tmp_path / "r.csv", tmp_path / "w.csv")
    assert back.row_lines == [] and back.weeds.shape == (0, 3)


def test_truth_files_io_error(tmp_path):
    with pytest.raises(OSError, match="nope"):
        sf.truth_to_files(sf.GroundTruth([]), tmp_path / "nope" / "r.csv", tmp_path / "w.csv")


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        FieldSpec(plant_dropout_prob=1.5)
    with pytest.raises(InvalidInputError):
        FieldSpec(weed_density_per_m2=-1)
    with pytest.raises(InvalidInputError):
        FieldSpec(palette="neon")


def _pcg64_reference(seed, n):
    """Pure-Python PCG XSL-RR 128/64 stepped from numpy's seeded state."""
    st = np.random.PCG64(seed).state["state"]
    state, inc = st["state"], st["inc"]
    mult = (2549297995355413924 << 64) + 4865540595714422341
    mask128 = (1 << 128) - 1
    out = []
    for _ in range(n):
        state = (state * mult + inc) & mask128
        xored = ((state >> 64) ^ state) & ((1 << 64) - 1)
        rot = state >> 122
        out.append(((xored >> rot) | (xored << ((64 - rot) & 63))) & ((1 << 64) - 1))
    return out


@pytest.mark.parametrize("seed", [0, 5, 123456789])
def test_uniform_stream_matches_pcg64_reference(seed):
    raw = _pcg64_reference(seed, 50)
    want = [(r >> 11) / 2.0 ** 53 for r in raw]
    assert sf._Uniforms(seed)(50).tolist() == want
