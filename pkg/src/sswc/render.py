"""Overlay rendering of rows, weeds and no-spray cells onto the source image."""

import math

import numpy as np

from .errors import InvalidInputError
from .raster import Raster

__all__ = ["render_overlay", "LINE_COLOR", "WEED_COLOR", "NO_SPRAY_COLOR"]

LINE_COLOR = (255, 0, 0)
WEED_COLOR = (255, 0, 255)
NO_SPRAY_COLOR = (0, 0, 255)


def _within(inner, outer, tol):
    return (inner[0] >= outer[0] - tol and inner[1] >= outer[1] - tol
            and inner[2] <= outer[2] + tol and inner[3] <= outer[3] + tol)


def _line_pixels(geo, ln, width, height):
    c1, r1 = geo.world_to_pixel(ln.x1, ln.y1)
    c2, r2 = geo.world_to_pixel(ln.x2, ln.y2)
    n = int(math.ceil(max(abs(c2 - c1), abs(r2 - r1)))) + 1
    t = np.linspace(0.0, 1.0, n)
    cols = np.floor(c1 + t * (c2 - c1) + 0.5).astype(np.int64)
    rows = np.floor(r1 + t * (r2 - r1) + 0.5).astype(np.int64)
    ok = (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
    return rows[ok], cols[ok]


def _cell_outline(geo, x0, y0, x1, y1, width, height):
    # pixel centers inside the half-open cell rectangle
    ca = math.ceil(geo.world_to_pixel(x0, 0.0)[0] - 1e-9)
    cb = math.ceil(geo.world_to_pixel(x1, 0.0)[0] - 1e-9) - 1
    ra = math.floor(geo.world_to_pixel(0.0, y1)[1] + 1e-9) + 1
    rb = math.floor(geo.world_to_pixel(0.0, y0)[1] + 1e-9)
    ca, ra = max(ca, 0), max(ra, 0)
    cb, rb = min(cb, width - 1), min(rb, height - 1)
    if ca > cb or ra > rb:
        return None
    return ra, rb, ca, cb


def render_overlay(raster, lines=None, weeds=None, prescription=None):
    """RGB copy of ``raster`` with layers recolored.

    Paint order: no-spray cell outlines, weed pixels, row lines.
    """
    if raster.bands == 1:
        base = np.repeat(raster.samples, 3, axis=2)
    elif raster.bands == 3:
        base = raster.samples.copy()
    else:
        raise InvalidInputError(f"cannot render a {raster.bands}-band raster")
    base = base.astype(np.uint8, copy=False)
    h, w = raster.height, raster.width
    geo = raster.geo
    extent = geo.extent(w, h)
    tol = 0.5 * geo.pixel_size_x
    if prescription is not None:
        if not _within(prescription.extent, extent, tol):
            raise InvalidInputError("prescription extent lies outside the raster")
        if prescription.rates is None:
            raise InvalidInputError("prescription rates are not assigned")
        for cell in prescription.cells():
            if cell.rate_l_per_ha != 0:
                continue
            box = _cell_outline(geo, cell.x0, cell.y0, cell.x1, cell.y1, w, h)
            if box is None:
                continue
            ra, rb, ca, cb = box
            for r in (ra, rb):
                base[r, ca:cb + 1] = NO_SPRAY_COLOR
            for c in (ca, cb):
                base[ra:rb + 1, c] = NO_SPRAY_COLOR
    if weeds is not None:
        if weeds.bits.shape != (h, w) or weeds.geo != geo:
            raise InvalidInputError("weed mask grid differs from the raster grid")
        base[weeds.bits] = WEED_COLOR
    for ln in lines or ():
        seg = (min(ln.x1, ln.x2), min(ln.y1, ln.y2), max(ln.x1, ln.x2), max(ln.y1, ln.y2))
        if not _within(seg, extent, tol):
            raise InvalidInputError(f"row line {ln} lies outside the raster")
        rows, cols = _line_pixels(geo, ln, w, h)
        base[rows, cols] = LINE_COLOR
    return Raster(base, geo)
