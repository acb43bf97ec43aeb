"""Section-control sprayer replay of a prescription map.

The boom travels serpentine passes. At every control tick each nozzle looks
up the prescription cell under its center (delayed by the valve latency) and
holds that on/off decision for the coming tick segment. ON nozzles leave a
``nozzle_spacing x tick_distance`` rectangle in the as-applied map.

Coverage areas are computed exactly on the lattice formed by all rectangle
edges, never by rasterising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _geojson
from .errors import FormatError, InvalidInputError
from .prescription import _locate_1d

__all__ = [
    "SprayerConfig",
    "Pass",
    "AsAppliedMap",
    "AccuracyReport",
    "plan_passes",
    "simulate",
    "application_accuracy",
    "accuracy_report",
    "implied_expected_no_spray",
    "union_area",
    "symmetric_difference_area",
    "spray_region_rects",
    "export_as_applied",
    "import_as_applied",
]

_EPS = 1e-9


@dataclass(frozen=True)
class SprayerConfig:
    """Boom geometry and control loop. Defaults: 41.64 m boom, 0.5 m nozzles, 10.5 km/h, 10 Hz."""

    boom_width_m: float = 41.64
    nozzle_spacing_m: float = 0.5
    speed_m_s: float = 10.5 / 3.6
    control_rate_hz: float = 10.0
    valve_latency_s: float = 0.0
    heading: str = "y"
    footprint_factor: float = 1.0

    def __post_init__(self):
        for name in ("boom_width_m", "nozzle_spacing_m", "speed_m_s", "control_rate_hz",
                     "footprint_factor"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be > 0, got {v}")
        if not (math.isfinite(self.valve_latency_s) and self.valve_latency_s >= 0):
            raise InvalidInputError(f"valve_latency_s must be >= 0, got {self.valve_latency_s}")
        if self.heading not in ("x", "y"):
            raise InvalidInputError(f"heading must be 'x' or 'y', got {self.heading!r}")

    @property
    def nozzle_count(self):
        return max(1, int(round(self.boom_width_m / self.nozzle_spacing_m)))

    @property
    def tick_distance_m(self):
        return self.speed_m_s / self.control_rate_hz

    @property
    def latency_ticks(self):
        lag = self.valve_latency_s * self.control_rate_hz
        return float(round(lag)) if abs(lag - round(lag)) < _EPS else lag

    def nozzle_offsets(self):
        n = self.nozzle_count
        return (np.arange(n) - (n - 1) / 2.0) * self.nozzle_spacing_m


@dataclass(frozen=True)
class Pass:
    index: int
    center: float  # across-travel coordinate of the boom center
    direction: int  # +1 travels toward increasing along-coordinate
    along_min: float
    along_max: float


def _axes(extent, heading):
    xmin, ymin, xmax, ymax = extent
    if heading == "y":
        return (xmin, xmax), (ymin, ymax)
    return (ymin, ymax), (xmin, xmax)


def plan_passes(extent, config=None):
    """Parallel serpentine passes spaced one boom width apart."""
    config = config or SprayerConfig()
    (a_lo, a_hi), (l_lo, l_hi) = _axes(extent, config.heading)
    span = a_hi - a_lo
    if not (span > 0 and l_hi > l_lo):
        raise InvalidInputError(f"extent {extent} has zero area")
    boom = config.boom_width_m
    n = max(1, math.ceil(span / boom - _EPS))
    if n == 1:
        centers = [0.5 * (a_lo + a_hi)]
    else:
        centers = [a_lo + (k + 0.5) * boom for k in range(n)]
    return [Pass(k, c, 1 if k % 2 == 0 else -1, l_lo, l_hi) for k, c in enumerate(centers)]


@dataclass(frozen=True, eq=False)
class AsAppliedMap:
    """Sprayed rectangles ``(x0, y0, x1, y1)`` with per-rectangle applied rate.

    ``pass_index``, ``nozzle`` and ``tick`` identify where each rectangle came
    from.
    """

    extent: tuple
    rects: np.ndarray
    rates: np.ndarray
    pass_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    nozzle: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    tick: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    tick_distance_m: float = 0.0
    nozzle_spacing_m: float = 0.0

    def __len__(self):
        return int(self.rates.size)

    def sprayed_area_m2(self):
        return union_area(self.rects, self.extent)

    def equals(self, other):
        return (tuple(self.extent) == tuple(other.extent)
                and np.array_equal(self.rects, other.rects)
                and np.array_equal(self.rates, other.rates)
                and np.array_equal(self.pass_index, other.pass_index)
                and np.array_equal(self.nozzle, other.nozzle)
                and np.array_equal(self.tick, other.tick))


def simulate(prescription, config=None, passes=None):
    """Replay ``prescription`` with a nozzle-controlled boom.

    Sampling uses the nozzle center at the tick instant. A point on a shared
    cell edge is looked up in the cell the nozzle is about to enter, so
    forward and reverse passes behave alike.
    """
    config = config or SprayerConfig()
    if prescription.rates is None:
        raise InvalidInputError("prescription rates are not assigned")
    extent = prescription.extent
    passes = plan_passes(extent, config) if passes is None else passes
    if config.heading == "y":
        across_edges, along_edges, rates = prescription.x_edges, prescription.y_edges, prescription.rates
    else:
        across_edges, along_edges, rates = prescription.y_edges, prescription.x_edges, prescription.rates.T
    d = config.tick_distance_m
    lag = config.latency_ticks
    half_w = 0.5 * config.nozzle_spacing_m * config.footprint_factor
    offsets = config.nozzle_offsets()
    out_rects, out_rates, out_pass, out_noz, out_tick = [], [], [], [], []
    for p in passes:
        length = p.along_max - p.along_min
        n_ticks = max(1, math.ceil(length / d - _EPS))
        k = np.arange(n_ticks)
        centers = p.center + offsets
        col = _locate_1d(across_edges, centers, False)
        if p.direction > 0:
            start = p.along_min + k * d
            end = np.minimum(p.along_min + (k + 1) * d, p.along_max)
            sample = p.along_min + (k - lag) * d
            row = _locate_1d(along_edges, sample, False)
            seg_lo, seg_hi = start, end
        else:
            start = p.along_max - k * d
            end = np.maximum(p.along_max - (k + 1) * d, p.along_min)
            sample = p.along_max - (k - lag) * d
            row = _locate_1d(along_edges, sample, True)
            seg_lo, seg_hi = end, start
        valid = (row[:, None] >= 0) & (col[None, :] >= 0)
        sampled = np.where(valid, rates[np.maximum(row, 0)[:, None], np.maximum(col, 0)[None, :]], 0.0)
        ti, ni = np.nonzero(sampled > 0)
        if ti.size == 0:
            continue
        a0 = centers[ni] - half_w
        a1 = centers[ni] + half_w
        l0, l1 = seg_lo[ti], seg_hi[ti]
        if config.heading == "y":
            r = np.column_stack([a0, l0, a1, l1])
        else:
            r = np.column_stack([l0, a0, l1, a1])
        out_rects.append(r)
        out_rates.append(sampled[ti, ni])
        out_pass.append(np.full(ti.size, p.index, dtype=np.int64))
        out_noz.append(ni.astype(np.int64))
        out_tick.append(ti.astype(np.int64))
    if out_rects:
        cat = np.concatenate
        return AsAppliedMap(tuple(extent), cat(out_rects), cat(out_rates), cat(out_pass),
                            cat(out_noz), cat(out_tick), d, config.nozzle_spacing_m)
    return AsAppliedMap(tuple(extent), np.empty((0, 4)), np.empty(0), tick_distance_m=d,
                        nozzle_spacing_m=config.nozzle_spacing_m)


# ------------------------------------------------------------ area algebra

def _clip(rects, extent):
    rects = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    xmin, ymin, xmax, ymax = extent
    c = np.column_stack([np.maximum(rects[:, 0], xmin), np.maximum(rects[:, 1], ymin),
                         np.minimum(rects[:, 2], xmax), np.minimum(rects[:, 3], ymax)])
    keep = (c[:, 2] > c[:, 0]) & (c[:, 3] > c[:, 1])
    return c[keep]


def _coverage(rects, xs, ys):
    diff = np.zeros((ys.size, xs.size), dtype=np.int64)
    if len(rects):
        i0 = np.searchsorted(xs, rects[:, 0])
        i1 = np.searchsorted(xs, rects[:, 2])
        j0 = np.searchsorted(ys, rects[:, 1])
        j1 = np.searchsorted(ys, rects[:, 3])
        np.add.at(diff, (j0, i0), 1)
        np.add.at(diff, (j0, i1), -1)
        np.add.at(diff, (j1, i0), -1)
        np.add.at(diff, (j1, i1), 1)
    cov = diff.cumsum(axis=0).cumsum(axis=1)
    return cov[:-1, :-1] > 0


def _lattice_area(cov, xs, ys):
    """Area of the True cells of a lattice coverage grid ``cov[y, x]``.

    Covered lengths are taken as run end minus run start in each column and
    identical neighbouring columns are merged, so one solid rectangle costs a
    single multiplication.
    """
    if cov.size == 0 or not cov.any():
        return 0.0
    ny, nx = cov.shape
    padded = np.zeros((ny + 2, nx), dtype=bool)
    padded[1:-1] = cov
    step = np.diff(padded.astype(np.int8), axis=0)
    sc, sy = np.nonzero(step.T == 1)
    ec, ey = np.nonzero(step.T == -1)
    col_len = np.bincount(sc, weights=ys[ey] - ys[sy], minlength=nx)
    same = np.zeros(nx, dtype=bool)
    same[1:] = np.all(cov[:, 1:] == cov[:, :-1], axis=0)
    starts = np.flatnonzero(~same)
    ends = np.append(starts[1:], nx)
    return float(np.sum((xs[ends] - xs[starts]) * col_len[starts]))


def _lattice(extent, *rect_sets):
    xmin, ymin, xmax, ymax = extent
    xs = np.unique(np.concatenate([[xmin, xmax]] + [r[:, [0, 2]].ravel() for r in rect_sets]))
    ys = np.unique(np.concatenate([[ymin, ymax]] + [r[:, [1, 3]].ravel() for r in rect_sets]))
    return xs, ys


def union_area(rects, extent):
    """Exact area of the union of rectangles clipped to ``extent``."""
    r = _clip(rects, extent)
    xs, ys = _lattice(extent, r)
    return _lattice_area(_coverage(r, xs, ys), xs, ys)


def symmetric_difference_area(rects_a, rects_b, extent):
    a = _clip(rects_a, extent)
    b = _clip(rects_b, extent)
    xs, ys = _lattice(extent, a, b)
    return _lattice_area(_coverage(a, xs, ys) ^ _coverage(b, xs, ys), xs, ys)


def spray_region_rects(prescription):
    """Rectangles of all cells with a positive rate."""
    r, c = np.nonzero(prescription.rates > 0)
    xe, ye = prescription.x_edges, prescription.y_edges
    return np.column_stack([xe[c], ye[r], xe[c + 1], ye[r + 1]]).astype(np.float64)


# --------------------------------------------------------------- accuracy

@dataclass(frozen=True)
class AccuracyReport:
    """Ratio of not-sprayed area achieved to not-sprayed area prescribed.

    ``accuracy`` is ``None`` when the prescription has no no-spray area.
    """

    expected_no_spray_m2: Optional[float]
    measured_no_spray_m2: float
    accuracy: Optional[float]
    sprayed_m2: float
    total_m2: float
    savings_frac: float

    def to_report(self):
        return "".join(f"{k}={'undefined' if v is None else repr(v)}\n"
                       for k, v in self.__dict__.items())


def accuracy_report(measured_no_spray_m2, total_m2, expected_no_spray_m2=None):
    """Build a report from area figures alone (e.g. numbers read off a field trial)."""
    if total_m2 <= 0:
        raise InvalidInputError("total area must be > 0")
    acc = None
    if expected_no_spray_m2 is not None and expected_no_spray_m2 > 0:
        acc = measured_no_spray_m2 / expected_no_spray_m2
    return AccuracyReport(expected_no_spray_m2, measured_no_spray_m2, acc,
                          total_m2 - measured_no_spray_m2, total_m2,
                          measured_no_spray_m2 / total_m2)


def implied_expected_no_spray(measured_no_spray_m2, accuracy):
    if not accuracy > 0:
        raise InvalidInputError("accuracy must be > 0")
    return measured_no_spray_m2 / accuracy


def application_accuracy(as_applied, prescription):
    if prescription.rates is None:
        raise InvalidInputError("prescription rates are not assigned")
    ext = prescription.extent
    if any(abs(a - b) > 1e-9 for a, b in zip(ext, as_applied.extent)):
        raise InvalidInputError(f"extents differ: {ext} vs {as_applied.extent}")
    areas = prescription.cell_areas()
    expected = float(areas[prescription.rates == 0].sum())
    xmin, ymin, xmax, ymax = ext
    total = (xmax - xmin) * (ymax - ymin)
    sprayed = union_area(as_applied.rects, ext)
    measured = total - sprayed
    acc = measured / expected if expected > 0 else None
    return AccuracyReport(expected, measured, acc, sprayed, total, measured / total)


# ------------------------------------------------------------------ export

def export_as_applied(as_applied, path, crs=_geojson.DEFAULT_CRS):
    feats = []
    for i in range(len(as_applied)):
        x0, y0, x1, y1 = (float(v) for v in as_applied.rects[i])
        props = {"applied_rate_l_per_ha": float(as_applied.rates[i]),
                 "pass": int(as_applied.pass_index[i]), "nozzle": int(as_applied.nozzle[i]),
                 "tick": int(as_applied.tick[i])}
        feats.append(_geojson.feature(x0, y0, x1, y1, props))
    doc = {"type": "FeatureCollection", "crs": _geojson.crs_member(crs),
           "as_applied": {"extent": [float(v) for v in as_applied.extent],
                          "tick_distance_m": as_applied.tick_distance_m,
                          "nozzle_spacing_m": as_applied.nozzle_spacing_m},
           "features": feats}
    _geojson.dump(doc, path)


def import_as_applied(path):
    doc, feats = _geojson.load(path)
    header = doc.get("as_applied")
    if not isinstance(header, dict) or "extent" not in header:
        raise FormatError("missing 'as_applied' header with extent", str(path))
    try:
        extent = tuple(float(v) for v in header["extent"])
    except (TypeError, ValueError):
        raise FormatError("extent must be 4 numbers", str(path)) from None
    if len(extent) != 4 or not (extent[2] > extent[0] and extent[3] > extent[1]):
        raise FormatError(f"invalid extent {extent}", str(path))
    n = len(feats)
    rects = np.empty((n, 4))
    rates = np.empty(n)
    ids = np.zeros((3, n), dtype=np.int64)
    for i, f in enumerate(feats):
        ctx = f"{path}: feature {i}"
        if not isinstance(f, dict):
            raise FormatError("feature must be an object", ctx)
        rects[i] = _geojson.ring_to_rect(f.get("geometry"), ctx)
        props = f.get("properties") or {}
        rate = props.get("applied_rate_l_per_ha")
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not math.isfinite(rate) \
                or rate < 0:
            raise FormatError(f"applied_rate_l_per_ha must be a number >= 0, got {rate!r}", ctx)
        rates[i] = rate
        for k, key in enumerate(("pass", "nozzle", "tick")):
            v = props.get(key, 0)
            if isinstance(v, bool) or not isinstance(v, int):
                raise FormatError(f"property {key!r} must be an integer", ctx)
            ids[k, i] = v
    return AsAppliedMap(extent, rects, rates, ids[0], ids[1], ids[2],
                        float(header.get("tick_distance_m", 0.0)),
                        float(header.get("nozzle_spacing_m", 0.0)))
