"""Crop-row buffering, weed extraction and weed-region statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .raster import BinaryMask

__all__ = [
    "BufferSpec",
    "WeedRegion",
    "buffer_rows",
    "extract_weeds",
    "connected_components",
    "mask_area_m2",
    "write_regions_csv",
]

INCH_M = 0.0254
_CAP_EPS = 1e-12


@dataclass(frozen=True)
class BufferSpec:
    half_width_m: float = 3.5 * INCH_M

    def __post_init__(self):
        if not self.half_width_m > 0:
            raise InvalidInputError(f"half_width_m must be > 0, got {self.half_width_m}")


@dataclass(frozen=True)
class WeedRegion:
    pixels: int
    area_m2: float
    bbox: tuple  # (row_min, col_min, row_max, col_max), inclusive
    centroid_x_m: float
    centroid_y_m: float


def buffer_rows(lines, spec, geo, width, height):
    """Crop-zone mask: pixel centers within ``half_width_m`` of any segment.

    Distance is perpendicular; segment ends are flat caps, so a pixel whose
    projection falls outside the segment is never inside that segment's band.
    """
    hw = spec.half_width_m if isinstance(spec, BufferSpec) else float(spec)
    out = np.zeros((height, width), dtype=bool)
    sx, sy = geo.pixel_size_x, abs(geo.pixel_size_y)
    for ln in lines:
        ax, ay, bx, by = ln.x1, ln.y1, ln.x2, ln.y2
        dx, dy = bx - ax, by - ay
        seg_len = math.hypot(dx, dy)
        if seg_len == 0:
            continue
        ux, uy = dx / seg_len, dy / seg_len
        # pixel window around the segment's bounding box grown by hw
        cols = [geo.world_to_pixel(x, 0.0)[0] for x in (min(ax, bx) - hw, max(ax, bx) + hw)]
        rows = [geo.world_to_pixel(0.0, y)[1] for y in (max(ay, by) + hw, min(ay, by) - hw)]
        c0 = max(int(math.floor(min(cols))) - 1, 0)
        c1 = min(int(math.ceil(max(cols))) + 2, width)
        r0 = max(int(math.floor(min(rows))) - 1, 0)
        r1 = min(int(math.ceil(max(rows))) + 2, height)
        if c0 >= c1 or r0 >= r1:
            continue
        px = geo.origin_x + np.arange(c0, c1) * sx - ax
        py = geo.origin_y - np.arange(r0, r1) * sy - ay
        along = px[None, :] * ux + py[:, None] * uy
        perp = np.abs(px[None, :] * uy - py[:, None] * ux)
        inside = (perp <= hw) & (along >= -_CAP_EPS) & (along <= seg_len + _CAP_EPS)
        out[r0:r1, c0:c1] |= inside
    return BinaryMask(out, geo)


def extract_weeds(vegetation, crop_zone):
    """Vegetation outside the crop zone."""
    if not vegetation.same_grid(crop_zone):
        raise InvalidInputError(
            f"mask grids differ: {vegetation.bits.shape}/{vegetation.geo} vs "
            f"{crop_zone.bits.shape}/{crop_zone.geo}")
    return BinaryMask(vegetation.bits & ~crop_zone.bits, vegetation.geo)


_EIGHT = np.ones((3, 3), dtype=bool)
_FOUR = ndimage.generate_binary_structure(2, 1)


def connected_components(mask, connectivity=8):
    """Maximal connected regions ordered by (bbox min row, bbox min col)."""
    if connectivity not in (4, 8):
        raise InvalidInputError("connectivity must be 4 or 8")
    labels, n = ndimage.label(mask.bits, structure=_EIGHT if connectivity == 8 else _FOUR)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    centers = ndimage.center_of_mass(mask.bits, labels, idx)
    slices = ndimage.find_objects(labels)
    geo = mask.geo
    regions = []
    for k in range(n):
        sr, sc = slices[k]
        cx, cy = geo.pixel_to_world(centers[k][1], centers[k][0])
        regions.append(WeedRegion(int(counts[k]), int(counts[k]) * geo.pixel_area,
                                  (sr.start, sc.start, sr.stop - 1, sc.stop - 1),
                                  float(cx), float(cy)))
    regions.sort(key=lambda r: (r.bbox[0], r.bbox[1]))
    return regions


def mask_area_m2(mask, geo=None):
    geo = geo or mask.geo
    return mask.popcount() * geo.pixel_size_x * abs(geo.pixel_size_y)


def write_regions_csv(regions, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "pixels", "area_m2", "centroid_x_m", "centroid_y_m"])
        for i, r in enumerate(regions, start=1):
            w.writerow([i, r.pixels, repr(r.area_m2), repr(r.centroid_x_m), repr(r.centroid_y_m)])
