"""Seeded synthetic row-crop fields with exact ground truth.

Randomness comes only from the raw 64-bit output of a PCG64 bit generator
(PCG XSL-RR 128/64, seeded through numpy's ``SeedSequence``). Uniform
variates are built from the top 53 bits, so a given seed produces the same
field on any platform and numpy release that keeps PCG64's raw stream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .raster import GeoTransform, Raster
from .rowdetect import RowLine, read_lines_csv, write_lines_csv

__all__ = ["FieldSpec", "GroundTruth", "PALETTES", "generate", "generate_with_masks",
           "truth_to_files", "read_weeds_csv"]

# ExGI of each color: easy plant 0.7778, easy soil -0.0323; hard plant 0.10, hard soil 0.06
PALETTES = {
    "easy": {"plant": (60, 160, 50), "soil": (130, 100, 80)},
    "hard": {"plant": (100, 110, 90), "soil": (104, 106, 90)},
}


@dataclass(frozen=True)
class FieldSpec:
    width_m: float = 50.0
    height_m: float = 30.0
    gsd_m: float = 0.0063
    row_spacing_m: float = 0.762
    plant_diameter_m: float = 0.12
    plant_spacing_along_row_m: float = 0.18
    plant_dropout_prob: float = 0.0
    weed_density_per_m2: float = 0.0
    weed_diameter_min_m: float = 0.02
    weed_diameter_max_m: float = 0.08
    row_wobble_amplitude_px: float = 0.0
    row_wobble_wavelength_m: float = 20.0
    buffer_half_width_m: float = 0.0889
    palette: str = "easy"
    seed: int = 0

    def __post_init__(self):
        for name in ("width_m", "height_m", "gsd_m", "row_spacing_m", "plant_diameter_m",
                     "plant_spacing_along_row_m", "weed_diameter_min_m", "weed_diameter_max_m",
                     "row_wobble_wavelength_m", "buffer_half_width_m"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be > 0")
        if not 0.0 <= self.plant_dropout_prob <= 1.0:
            raise InvalidInputError("plant_dropout_prob must lie in [0, 1]")
        if self.weed_density_per_m2 < 0 or self.row_wobble_amplitude_px < 0:
            raise InvalidInputError("weed density and wobble amplitude must be >= 0")
        if self.weed_diameter_min_m > self.weed_diameter_max_m:
            raise InvalidInputError("weed_diameter_min_m exceeds weed_diameter_max_m")
        if self.palette not in PALETTES:
            raise InvalidInputError(f"unknown palette {self.palette!r}")

    @property
    def n_rows(self):
        return int(math.floor(self.height_m / self.row_spacing_m + 1e-9))

    def row_positions(self):
        return [(k + 0.5) * self.row_spacing_m for k in range(self.n_rows)]

    @property
    def shape_px(self):
        return (int(round(self.height_m / self.gsd_m)), int(round(self.width_m / self.gsd_m)))

    def geo(self):
        h, _ = self.shape_px
        g = self.gsd_m
        return GeoTransform(0.5 * g, h * g - 0.5 * g, g, -g)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    row_lines: list
    weeds: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))  # x_m, y_m, radius_m


class _Uniforms:
    def __init__(self, seed):
        self._bits = np.random.PCG64(int(seed))

    def __call__(self, n, lo=0.0, hi=1.0):
        raw = self._bits.random_raw(int(n))
        u = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        return lo + (hi - lo) * u


def _stamp_disks(bits, geo, cx, cy, radius):
    h, w = bits.shape
    g = geo.pixel_size_x
    for x, y, r in zip(np.atleast_1d(cx), np.atleast_1d(cy), np.broadcast_to(radius, np.shape(cx))):
        c_mid, r_mid = geo.world_to_pixel(x, y)
        rp = r / g
        c0 = max(int(math.floor(c_mid - rp)), 0)
        c1 = min(int(math.ceil(c_mid + rp)) + 1, w)
        r0 = max(int(math.floor(r_mid - rp)), 0)
        r1 = min(int(math.ceil(r_mid + rp)) + 1, h)
        if c0 >= c1 or r0 >= r1:
            continue
        px = geo.origin_x + np.arange(c0, c1) * g - x
        py = geo.origin_y + np.arange(r0, r1) * geo.pixel_size_y - y
        bits[r0:r1, c0:c1] |= (px[None, :] ** 2 + py[:, None] ** 2) <= r * r


def generate_with_masks(spec):
    """Like :func:`generate` but also returns the intended plant and weed masks."""
    n_rows = spec.n_rows
    if n_rows < 1:
        raise InvalidInputError(f"field height {spec.height_m} m cannot hold one row at "
                                f"{spec.row_spacing_m} m spacing")
    rnd = _Uniforms(spec.seed)
    geo = spec.geo()
    h, w = spec.shape_px
    plants = np.zeros((h, w), dtype=bool)
    weeds_bits = np.zeros((h, w), dtype=bool)

    xs = np.arange(0.5 * spec.plant_spacing_along_row_m, spec.width_m,
                   spec.plant_spacing_along_row_m)
    wobble = spec.row_wobble_amplitude_px * spec.gsd_m
    rows_y = spec.row_positions()
    lines = []
    for y_row in rows_y:
        phase = rnd(1, 0.0, 2 * math.pi)[0]
        keep = rnd(xs.size) >= spec.plant_dropout_prob
        px = xs[keep]
        py = y_row + wobble * np.sin(2 * math.pi * px / spec.row_wobble_wavelength_m + phase)
        _stamp_disks(plants, geo, px, py, 0.5 * spec.plant_diameter_m)
        lines.append(RowLine(0.0, y_row, spec.width_m, y_row))

    n_weeds = int(round(spec.weed_density_per_m2 * spec.width_m * spec.height_m))
    weeds = np.empty((0, 3))
    if n_weeds:
        wx = rnd(n_weeds, 0.0, spec.width_m)
        wy = rnd(n_weeds, 0.0, spec.height_m)
        wr = 0.5 * rnd(n_weeds, spec.weed_diameter_min_m, spec.weed_diameter_max_m)
        dist = np.min(np.abs(wy[:, None] - np.asarray(rows_y)[None, :]), axis=1)
        ok = dist >= spec.buffer_half_width_m + wr + wobble
        weeds = np.column_stack([wx[ok], wy[ok], wr[ok]])
        _stamp_disks(weeds_bits, geo, weeds[:, 0], weeds[:, 1], weeds[:, 2])

    pal = PALETTES[spec.palette]
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[...] = np.asarray(pal["soil"], dtype=np.uint8)
    rgb[plants | weeds_bits] = np.asarray(pal["plant"], dtype=np.uint8)
    return Raster(rgb, geo), GroundTruth(lines, weeds), plants, weeds_bits


def generate(spec):
    """Render an RGB field and its ground truth.

    Rows run along X, the first half a spacing above the bottom edge. Plants
    are disks every ``plant_spacing_along_row_m`` (some dropped at random);
    weeds are disks placed uniformly and discarded when they would touch the
    row buffer.
    """
    raster, truth, _, _ = generate_with_masks(spec)
    return raster, truth


def truth_to_files(truth, rows_path, weeds_path):
    try:
        write_lines_csv(truth.row_lines, rows_path)
        with open(weeds_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_m", "y_m", "radius_m"])
            for x, y, r in truth.weeds:
                w.writerow([repr(float(x)), repr(float(y)), repr(float(r))])
    except OSError as exc:
        raise OSError(f"writing ground truth to {rows_path} / {weeds_path}: {exc}") from exc


def read_weeds_csv(path):
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append([float(rec["x_m"]), float(rec["y_m"]), float(rec["radius_m"])])
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(str(exc), f"{path}:{lineno}") from None
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def read_truth(rows_path, weeds_path):
    return GroundTruth(read_lines_csv(rows_path), read_weeds_csv(weeds_path))
