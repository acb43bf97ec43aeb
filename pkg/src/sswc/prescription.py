"""Spray/no-spray prescription grids built from a weed mask.

A grid cell is a half-open rectangle ``[x0, x1) x [y0, y1)`` so every point
of the extent belongs to exactly one cell. Cells are stored as two edge
arrays plus per-cell arrays indexed ``[row, col]``; row runs along Y from
the grid origin and col along X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _geojson
from .errors import FormatError, InvalidInputError

__all__ = [
    "GridSpec",
    "Cell",
    "PrescriptionMap",
    "PrescriptionStats",
    "build_grid",
    "assign_rates",
    "prescription_stats",
    "export_prescription",
    "import_prescription",
    "DEFAULT_SPRAY_RATE",
]

FOOT_M = 0.3048
DEFAULT_SPRAY_RATE = 140.3
_SNAP = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Cell size across and along the direction of travel.

    Defaults are 1.67 ft across (one nozzle-width column) by 10 ft along.
    ``origin`` defaults to the extent's minimum corner.
    """

    cell_across_m: float = 0.509
    cell_along_m: float = 10 * FOOT_M
    origin: Optional[tuple] = None
    travel_axis: str = "y"

    def __post_init__(self):
        if not (self.cell_across_m > 0 and self.cell_along_m > 0):
            raise InvalidInputError("cell dimensions must be > 0")
        if self.travel_axis not in ("x", "y"):
            raise InvalidInputError(f"travel_axis must be 'x' or 'y', got {self.travel_axis!r}")

    @property
    def cell_width(self):
        return self.cell_across_m if self.travel_axis == "y" else self.cell_along_m

    @property
    def cell_height(self):
        return self.cell_along_m if self.travel_axis == "y" else self.cell_across_m


@dataclass(frozen=True)
class Cell:
    x0: float
    y0: float
    x1: float
    y1: float
    row: int
    col: int
    rate_l_per_ha: Optional[float]
    weed_pixels: Optional[int]

    @property
    def area_m2(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, x, y):
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True, eq=False)
class PrescriptionMap:
    spec: GridSpec
    x_edges: np.ndarray
    y_edges: np.ndarray
    spray_rate_l_per_ha: float = DEFAULT_SPRAY_RATE
    rates: Optional[np.ndarray] = None
    weed_pixels: Optional[np.ndarray] = None
    crs: str = field(default=_geojson.DEFAULT_CRS)

    @property
    def extent(self):
        return (float(self.x_edges[0]), float(self.y_edges[0]),
                float(self.x_edges[-1]), float(self.y_edges[-1]))

    @property
    def shape(self):
        return (self.y_edges.size - 1, self.x_edges.size - 1)

    @property
    def n_cells(self):
        r, c = self.shape
        return r * c

    def cell_areas(self):
        return np.outer(np.diff(self.y_edges), np.diff(self.x_edges))

    def cells(self):
        """Cells in row-major order."""
        nr, nc = self.shape
        for r in range(nr):
            for c in range(nc):
                yield Cell(float(self.x_edges[c]), float(self.y_edges[r]),
                           float(self.x_edges[c + 1]), float(self.y_edges[r + 1]), r, c,
                           None if self.rates is None else float(self.rates[r, c]),
                           None if self.weed_pixels is None else int(self.weed_pixels[r, c]))

    def locate(self, x, y, upper_closed_x=False, upper_closed_y=False):
        """Cell ``(row, col)`` arrays for points; -1 where outside the extent.

        With the default half-open rule a point on a shared edge belongs to
        the cell above/right of it. ``upper_closed_*`` flips the rule to
        ``(lo, hi]`` along that axis.
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        col = _locate_1d(self.x_edges, x, upper_closed_x)
        row = _locate_1d(self.y_edges, y, upper_closed_y)
        bad = (col < 0) | (row < 0)
        return np.where(bad, -1, row), np.where(bad, -1, col)

    def equals(self, other, tol=1e-6):
        if self.shape != other.shape:
            return False
        if not (np.allclose(self.x_edges, other.x_edges, rtol=0, atol=tol)
                and np.allclose(self.y_edges, other.y_edges, rtol=0, atol=tol)):
            return False
        for a, b in ((self.rates, other.rates), (self.weed_pixels, other.weed_pixels)):
            if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                return False
        return self.spray_rate_l_per_ha == other.spray_rate_l_per_ha


def _locate_1d(edges, v, upper_closed):
    side = "left" if upper_closed else "right"
    idx = np.searchsorted(edges, v, side=side) - 1
    n = edges.size - 1
    if upper_closed:
        ok = (v > edges[0]) & (v <= edges[-1])
    else:
        ok = (v >= edges[0]) & (v < edges[-1])
    return np.where(ok & (idx >= 0) & (idx < n), idx, -1)


def _edges(lo, hi, origin, size):
    first = math.floor((lo - origin) / size + _SNAP)
    last = math.ceil((hi - origin) / size - _SNAP)
    inner = [origin + i * size for i in range(first + 1, last)]
    inner = [e for e in inner if lo + _SNAP < e < hi - _SNAP]
    return np.array([lo] + inner + [hi], dtype=np.float64)


def build_grid(extent, spec=None, spray_rate_l_per_ha=DEFAULT_SPRAY_RATE):
    """Overlay a cell grid on ``extent = (xmin, ymin, xmax, ymax)``; rates unset."""
    spec = spec or GridSpec()
    xmin, ymin, xmax, ymax = map(float, extent)
    if not (xmax > xmin and ymax > ymin):
        raise InvalidInputError(f"extent {extent} has zero area")
    if spray_rate_l_per_ha < 0:
        raise InvalidInputError("spray rate must be >= 0")
    ox, oy = spec.origin if spec.origin is not None else (xmin, ymin)
    return PrescriptionMap(spec,
                           _edges(xmin, xmax, float(ox), spec.cell_width),
                           _edges(ymin, ymax, float(oy), spec.cell_height),
                           float(spray_rate_l_per_ha))


def assign_rates(pmap, weeds):
    """Count weed pixel centers per cell; any weed pixel means the cell is sprayed."""
    xmin, ymin, xmax, ymax = pmap.extent
    mx0, my0, mx1, my1 = weeds.extent()
    tol = 1e-6
    if xmin < mx0 - tol or ymin < my0 - tol or xmax > mx1 + tol or ymax > my1 + tol:
        raise InvalidInputError(
            f"prescription extent {pmap.extent} is not covered by the weed mask extent "
            f"{(mx0, my0, mx1, my1)}")
    rows, cols = np.nonzero(weeds.bits)
    x, y = weeds.geo.pixel_to_world(cols.astype(np.float64), rows.astype(np.float64))
    r, c = pmap.locate(x, y)
    keep = r >= 0
    nr, nc = pmap.shape
    counts = np.bincount(r[keep] * nc + c[keep], minlength=nr * nc).reshape(nr, nc)
    rates = np.where(counts >= 1, pmap.spray_rate_l_per_ha, 0.0)
    return replace(pmap, rates=rates, weed_pixels=counts.astype(np.int64))


@dataclass(frozen=True)
class PrescriptionStats:
    cells_total: int
    cells_no_spray: int
    cells_spray: int
    frac_no_spray: float
    area_no_spray_m2: float
    area_spray_m2: float
    area_total_m2: float

    def to_report(self):
        return "".join(f"{k}={v!r}\n" for k, v in self.__dict__.items())


def prescription_stats(pmap):
    if pmap.rates is None:
        raise InvalidInputError("prescription rates are not assigned")
    areas = pmap.cell_areas()
    off = pmap.rates == 0
    total = pmap.n_cells
    n_off = int(off.sum())
    return PrescriptionStats(total, n_off, total - n_off, n_off / total,
                             float(areas[off].sum()), float(areas[~off].sum()),
                             float(areas.sum()))


# ------------------------------------------------------------------ export

def export_prescription(pmap, path):
    if pmap.rates is None:
        raise InvalidInputError("cannot export a prescription without rates")
    feats = []
    for cell in pmap.cells():
        props = {"rate_l_per_ha": cell.rate_l_per_ha, "row": cell.row, "col": cell.col,
                 "weed_pixels": 0 if cell.weed_pixels is None else cell.weed_pixels}
        feats.append(_geojson.feature(cell.x0, cell.y0, cell.x1, cell.y1, props))
    spec = pmap.spec
    doc = {
        "type": "FeatureCollection",
        "crs": _geojson.crs_member(pmap.crs),
        "prescription": {
            "spray_rate_l_per_ha": pmap.spray_rate_l_per_ha,
            "cell_across_m": spec.cell_across_m,
            "cell_along_m": spec.cell_along_m,
            "travel_axis": spec.travel_axis,
            "origin": None if spec.origin is None else list(spec.origin),
            "has_weed_counts": pmap.weed_pixels is not None,
        },
        "features": feats,
    }
    _geojson.dump(doc, path)


def _int_prop(props, key, context, required=True):
    v = props.get(key)
    if v is None and not required:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise FormatError(f"property {key!r} must be a non-negative integer, got {v!r}", context)
    return v


def import_prescription(path):
    doc, feats = _geojson.load(path)
    if not feats:
        raise FormatError("prescription has no features", str(path))
    header = doc.get("prescription") or {}
    cells = {}
    for i, f in enumerate(feats):
        ctx = f"{path}: feature {i}"
        if not isinstance(f, dict):
            raise FormatError("feature must be an object", ctx)
        rect = _geojson.ring_to_rect(f.get("geometry"), ctx)
        props = f.get("properties") or {}
        rate = props.get("rate_l_per_ha")
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not math.isfinite(rate):
            raise FormatError(f"rate_l_per_ha must be a number, got {rate!r}", ctx)
        if rate < 0:
            raise FormatError(f"negative rate {rate}", ctx)
        row = _int_prop(props, "row", ctx)
        col = _int_prop(props, "col", ctx)
        weeds = _int_prop(props, "weed_pixels", ctx, required=False)
        if (row, col) in cells:
            raise FormatError(f"duplicate cell (row={row}, col={col})", ctx)
        cells[(row, col)] = (rect, float(rate), weeds, ctx)
    nr = 1 + max(r for r, _ in cells)
    nc = 1 + max(c for _, c in cells)
    if len(cells) != nr * nc:
        raise FormatError(f"{len(cells)} features do not fill a {nr}x{nc} grid", str(path))
    x_edges = np.empty(nc + 1)
    y_edges = np.empty(nr + 1)
    rates = np.empty((nr, nc))
    weed_px = np.zeros((nr, nc), dtype=np.int64)
    for c in range(nc):
        (x0, _, x1, _), *_ = cells[(0, c)]
        x_edges[c], x_edges[c + 1] = x0, x1
    for r in range(nr):
        (_, y0, _, y1), *_ = cells[(r, 0)]
        y_edges[r], y_edges[r + 1] = y0, y1
    for (r, c), ((x0, y0, x1, y1), rate, weeds, ctx) in cells.items():
        if not (abs(x0 - x_edges[c]) <= _SNAP and abs(x1 - x_edges[c + 1]) <= _SNAP
                and abs(y0 - y_edges[r]) <= _SNAP and abs(y1 - y_edges[r + 1]) <= _SNAP):
            raise FormatError("cell rectangle does not match the grid formed by its row/col", ctx)
        rates[r, c] = rate
        weed_px[r, c] = 0 if weeds is None else weeds
    if np.any(np.diff(x_edges) <= 0) or np.any(np.diff(y_edges) <= 0):
        raise FormatError("grid edges are not strictly increasing", str(path))
    spray = header.get("spray_rate_l_per_ha")
    if spray is None:
        positive = rates[rates > 0]
        spray = float(positive.max()) if positive.size else DEFAULT_SPRAY_RATE
    origin = header.get("origin")
    spec = GridSpec(float(header.get("cell_across_m", x_edges[1] - x_edges[0])),
                    float(header.get("cell_along_m", y_edges[1] - y_edges[0])),
                    None if origin is None else tuple(origin),
                    header.get("travel_axis", "y"))
    crs = ((doc.get("crs") or {}).get("properties") or {}).get("name", _geojson.DEFAULT_CRS)
    has_counts = header.get("has_weed_counts", True)
    return PrescriptionMap(spec, x_edges, y_edges, float(spray), rates,
                           weed_px if has_counts else None, crs)
