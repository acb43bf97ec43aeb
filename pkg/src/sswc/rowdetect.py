"""Crop-row detection from a vegetation mask by tiled projection profiles.

Each tile's 1-bits are counted along X, giving one sum per pixel-row; rows
of crop show up as peaks of that profile and every accepted peak becomes a
straight line across the tile at that pixel-row.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import FormatError, InvalidInputError, UndefinedOrientationError

__all__ = [
    "TileSpec",
    "Tile",
    "ProjectionProfile",
    "PeakParams",
    "RowLine",
    "DetectionEvaluation",
    "tile_mask",
    "projection_profile",
    "smooth_profile",
    "find_peaks",
    "emit_row_lines",
    "detect_rows",
    "merge_duplicate_lines",
    "estimate_row_orientation",
    "evaluate_detection",
    "evaluation_from_counts",
    "split_lines_by_tiles",
    "refine_peaks",
    "write_lines_csv",
    "read_lines_csv",
]

DEFAULT_ROW_SPACING_M = 0.762
DEFAULT_GSD_M = 0.0063
LINES_CSV_HEADER = ["x1_m", "y1_m", "x2_m", "y2_m", "tile_col", "tile_row", "peak_row_px"]


@dataclass(frozen=True)
class TileSpec:
    tile_width: int = 3000
    tile_height: int = 2000
    col_offset: int = 0
    row_offset: int = 0

    def __post_init__(self):
        if self.tile_width < 1 or self.tile_height < 1:
            raise InvalidInputError("tile dimensions must be >= 1")

    def column_bounds(self, width):
        return _tile_bounds(width, self.tile_width, self.col_offset)

    def row_bounds(self, height):
        return _tile_bounds(height, self.tile_height, self.row_offset)


def _tile_bounds(n, size, offset):
    start = offset % size
    cuts = [0] + list(range(start, n, size)) + [n]
    cuts = sorted(set(cuts))
    return list(zip(cuts[:-1], cuts[1:]))


@dataclass(frozen=True, eq=False)
class Tile:
    bits: np.ndarray
    col0: int
    row0: int
    tile_col: int
    tile_row: int

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]


@dataclass(frozen=True, eq=False)
class ProjectionProfile:
    sums: np.ndarray
    tile_col: int = 0
    tile_row: int = 0


@dataclass(frozen=True)
class PeakParams:
    """Peak selection rule.

    ``min_prominence`` is a fraction of the smoothed profile's maximum.
    """

    smooth_window: int = 31
    min_distance: int = 60
    min_prominence: float = 0.1

    def __post_init__(self):
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise InvalidInputError(f"smooth_window must be odd and >= 1, got {self.smooth_window}")
        if self.min_distance < 1:
            raise InvalidInputError(f"min_distance must be >= 1, got {self.min_distance}")
        if not 0.0 <= self.min_prominence <= 1.0:
            raise InvalidInputError(f"min_prominence must lie in [0, 1], got {self.min_prominence}")

    @classmethod
    def for_row_spacing(cls, row_spacing_m=DEFAULT_ROW_SPACING_M, gsd_m=DEFAULT_GSD_M,
                        min_prominence=0.1):
        spacing_px = row_spacing_m / gsd_m
        window = max(1, int(round(0.25 * spacing_px)))
        if window % 2 == 0:
            window += 1
        return cls(window, max(1, int(round(0.5 * spacing_px))), min_prominence)


@dataclass(frozen=True)
class RowLine:
    """A detected (or ground-truth) row segment in world meters.

    ``weight`` is the raw profile count at the peak; it only drives merging
    and is not persisted to CSV.
    """

    x1: float
    y1: float
    x2: float
    y2: float
    tile_col: Optional[int] = None
    tile_row: Optional[int] = None
    peak_row_px: Optional[int] = None
    weight: float = field(default=1.0, compare=False)

    @property
    def position(self):
        """Scalar row position: mean perpendicular (Y) coordinate."""
        return 0.5 * (self.y1 + self.y2)

    @property
    def x_range(self):
        return (min(self.x1, self.x2), max(self.x1, self.x2))


# ------------------------------------------------------------------ tiling

def tile_mask(mask, spec=None):
    """Split a mask into tiles (views, no copies) in row-major tile order."""
    spec = spec or TileSpec()
    bits = mask.bits
    if bits.size == 0:
        raise InvalidInputError("cannot tile an empty mask")
    tiles = []
    for tr, (r0, r1) in enumerate(spec.row_bounds(bits.shape[0])):
        for tc, (c0, c1) in enumerate(spec.column_bounds(bits.shape[1])):
            tiles.append(Tile(bits[r0:r1, c0:c1], c0, r0, tc, tr))
    return tiles


def projection_profile(tile):
    bits = tile.bits if isinstance(tile, Tile) else np.asarray(tile)
    sums = np.count_nonzero(bits, axis=1).astype(np.int64)
    if isinstance(tile, Tile):
        return ProjectionProfile(sums, tile.tile_col, tile.tile_row)
    return ProjectionProfile(sums)


# ------------------------------------------------------------ peak finding

def smooth_profile(values, window):
    """Centered moving average; the window shrinks at the ends."""
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if window <= 1 or n == 0:
        return x.copy()
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def _plateau_candidates(x):
    """Local maxima (incl. plateaus and profile ends) as (center, start, stop) triples."""
    n = x.size
    if n == 0:
        return []
    change = np.flatnonzero(np.diff(x) != 0) + 1
    starts = np.concatenate(([0], change))
    stops = np.concatenate((change, [n])) - 1
    out = []
    for a, b in zip(starts.tolist(), stops.tolist()):
        v = x[a]
        has_left, has_right = a > 0, b < n - 1
        if not (has_left or has_right):
            continue
        if has_left and x[a - 1] >= v:
            continue
        if has_right and x[b + 1] >= v:
            continue
        out.append(((a + b) // 2, a, b))
    return out


def _prominence(x, a, b):
    v = x[a]
    bases = []
    if a > 0:
        left = x[:a]
        higher = np.flatnonzero(left > v)
        j = higher[-1] + 1 if higher.size else 0
        bases.append(left[j:].min())
    if b < x.size - 1:
        right = x[b + 1:]
        higher = np.flatnonzero(right > v)
        k = higher[0] if higher.size else right.size
        bases.append(right[:k].min())
    return v - max(bases)


def find_peaks(profile, params=None):
    """Row indices of accepted peaks, ascending.

    Steps: moving-average smoothing, local maxima (plateaus collapse to their
    center, rounded down), a prominence floor relative to the profile
    maximum, then greedy suppression by ``min_distance`` in order of height.
    A profile end counts as a maximum when its single neighbor is lower; this
    keeps rows that a tile boundary cuts in half.
    """
    params = params or PeakParams()
    sums = profile.sums if isinstance(profile, ProjectionProfile) else profile
    x = smooth_profile(sums, params.smooth_window)
    if x.size == 0:
        return np.empty(0, dtype=np.int64)
    top = x.max()
    if top <= 0:
        return np.empty(0, dtype=np.int64)
    floor = params.min_prominence * top
    cands = [(c, x[a]) for c, a, b in _plateau_candidates(x) if _prominence(x, a, b) >= floor]
    if not cands:
        return np.empty(0, dtype=np.int64)
    idx = np.array([c for c, _ in cands], dtype=np.int64)
    heights = np.array([h for _, h in cands])
    order = np.argsort(-heights, kind="stable")
    accepted = []
    for i in idx[order]:
        if all(abs(i - j) >= params.min_distance for j in accepted):
            accepted.append(int(i))
    return np.array(sorted(accepted), dtype=np.int64)


def refine_peaks(profile, peaks, half_window):
    """Move each peak to the half-maximum centroid of the raw profile.

    A box filter wider than a row's own profile has a flat top, and any
    stray pixel within reach tilts it so the maximum lands at a plateau
    edge. The centroid of the raw counts at or above half the local maximum,
    within ``half_window`` of the peak, recovers the row center.
    """
    sums = profile.sums if isinstance(profile, ProjectionProfile) else np.asarray(profile)
    out = []
    for p in np.asarray(peaks, dtype=np.int64).tolist():
        lo, hi = max(p - half_window, 0), min(p + half_window + 1, sums.size)
        seg = sums[lo:hi].astype(np.float64)
        top = seg.max()
        if top <= 0:
            out.append(p)
            continue
        keep = seg >= 0.5 * top
        idx = np.arange(lo, hi)[keep]
        out.append(int(math.floor(np.dot(idx, seg[keep]) / seg[keep].sum() + 0.5)))
    return np.array(out, dtype=np.int64)


# --------------------------------------------------------------- row lines

def emit_row_lines(peaks, tile, geo, weights=None):
    """One line per peak across the tile's full X extent (pixel centers)."""
    lines = []
    c_first = tile.col0
    c_last = tile.col0 + tile.width - 1
    for k, p in enumerate(np.asarray(peaks, dtype=np.int64).tolist()):
        row = tile.row0 + p
        x1, y1 = geo.pixel_to_world(c_first, row)
        x2, y2 = geo.pixel_to_world(c_last, row)
        w = 1.0 if weights is None else float(weights[k])
        lines.append(RowLine(x1, y1, x2, y2, tile.tile_col, tile.tile_row, int(p), w))
    return lines


def _detect_tile(tile, geo, params, refine):
    prof = projection_profile(tile)
    peaks = find_peaks(prof, params)
    if refine and peaks.size:
        peaks = refine_peaks(prof, peaks, params.smooth_window // 2)
    return emit_row_lines(peaks, tile, geo, weights=prof.sums[peaks] if peaks.size else None)


def detect_rows(mask, tile_spec=None, params=None, threads=1, refine=False):
    """Run the per-tile profile/peak/line chain over a whole mask.

    Tiles are independent; ``threads > 1`` evaluates them concurrently. Output
    order is row-major tile order regardless of scheduling. ``refine`` applies
    :func:`refine_peaks` to each tile's accepted peaks.
    """
    if params is None:
        params = PeakParams.for_row_spacing(gsd_m=mask.geo.pixel_size_x)
    tiles = tile_mask(mask, tile_spec)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_tile = list(pool.map(lambda t: _detect_tile(t, mask.geo, params, refine), tiles))
    else:
        per_tile = [_detect_tile(t, mask.geo, params, refine) for t in tiles]
    return [ln for lines in per_tile for ln in lines]


def merge_duplicate_lines(lines, min_separation_m=0.4 * DEFAULT_ROW_SPACING_M, enabled=False):
    """Collapse lines closer than ``min_separation_m`` within a tile column.

    Lines sharing an X extent are sorted by position and chained wherever
    consecutive gaps are below the threshold; each chain becomes one line at
    the weight-averaged position. Identity when ``enabled`` is false.
    """
    lines = list(lines)
    if not enabled:
        return lines
    groups = {}
    for ln in lines:
        groups.setdefault(ln.x_range, []).append(ln)
    out = []
    for members in groups.values():
        members = sorted(members, key=lambda ln: ln.position)
        cluster = [members[0]]
        for ln in members[1:]:
            if ln.position - cluster[-1].position < min_separation_m:
                cluster.append(ln)
            else:
                out.append(_merge_cluster(cluster))
                cluster = [ln]
        out.append(_merge_cluster(cluster))
    return out


def _merge_cluster(cluster):
    if len(cluster) == 1:
        return cluster[0]
    w = np.array([max(ln.weight, 0.0) for ln in cluster], dtype=np.float64)
    if w.sum() <= 0:
        w = np.ones_like(w)
    y1 = float(np.dot(w, [ln.y1 for ln in cluster]) / w.sum())
    y2 = float(np.dot(w, [ln.y2 for ln in cluster]) / w.sum())
    head = cluster[int(np.argmax(w))]
    return RowLine(head.x1, y1, head.x2, y2, head.tile_col, head.tile_row,
                   head.peak_row_px, float(w.sum()))


# ------------------------------------------------------------ orientation

def _density_score(bits, valid):
    counts = valid.sum(axis=1)
    keep = counts >= 0.5 * counts.max()
    dens = bits.sum(axis=1)[keep] / counts[keep]
    n = counts[keep]
    var = dens.var()
    noise = np.mean(dens * (1.0 - dens) / n)
    return var, noise


def estimate_row_orientation(mask, angle_range=(-45.0, 45.0), step=1.0, significance=4.0):
    """Rotation (degrees) that best aligns rows with the X axis.

    Scores each candidate angle by the variance of per-row vegetation
    density after a nearest-neighbour rotation. When no angle beats the
    binomial noise floor by ``significance`` times, every angle is treated
    as tied and 0 is returned; otherwise exact ties go to the smallest
    absolute angle.
    """
    bits = mask.bits if hasattr(mask, "bits") else np.asarray(mask, dtype=bool)
    if not bits.any():
        raise UndefinedOrientationError("orientation of an empty mask is undefined")
    lo, hi = max(angle_range[0], -45.0), min(angle_range[1], 45.0)
    n = int(math.floor((hi - lo) / step + 1e-9))
    angles = lo + step * np.arange(n + 1)
    if not np.any(np.isclose(angles, 0.0)) and lo <= 0.0 <= hi:
        angles = np.sort(np.append(angles, 0.0))
    src = bits.astype(np.uint8)
    ones = np.ones_like(src)
    best = None
    for a in angles:
        rb = ndimage.rotate(src, a, order=0, reshape=True, mode="constant", cval=0)
        rv = ndimage.rotate(ones, a, order=0, reshape=True, mode="constant", cval=0)
        var, noise = _density_score(rb.astype(bool), rv.astype(bool))
        ratio = var / noise if noise > 0 else (math.inf if var > 0 else 0.0)
        key = (var, -abs(a), a)
        if best is None or key > best[0]:
            best = (key, ratio)
    (_, _, angle), ratio = best
    if ratio < significance:
        return 0.0
    return float(angle)


# ------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class DetectionEvaluation:
    """Confusion counts plus derived metrics; ``None`` marks an undefined ratio."""

    tp: int
    fp: int
    fn: int
    tn: int
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    accuracy: Optional[float]

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("tp", "fp", "fn", "tn", "precision", "recall", "f1", "accuracy")}

    def to_report(self):
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k}={'undefined' if v is None else v}")
        return "\n".join(lines) + "\n"


def _ratio(num, den):
    return None if den == 0 else num / den


def evaluation_from_counts(tp, fp, fn, tn=0):
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    accuracy = _ratio(tp + tn, tp + fp + fn + tn)
    return DetectionEvaluation(tp, fp, fn, tn, precision, recall, f1, accuracy)


def evaluate_detection(detected, truth, match_tolerance_m=0.25 * DEFAULT_ROW_SPACING_M):
    """One-to-one greedy nearest matching of detected rows to true rows.

    Lines reduce to their scalar position. Only pairs whose X extents overlap
    are matchable, so tile-length segments pair with the truth segments of
    the same tile column. TN is always 0.
    """
    detected = list(detected)
    truth = list(truth)
    pairs = []
    for i, d in enumerate(detected):
        dx0, dx1 = d.x_range
        for j, t in enumerate(truth):
            tx0, tx1 = t.x_range
            if min(dx1, tx1) - max(dx0, tx0) <= 0 and not (dx0 == dx1 == tx0 == tx1):
                continue
            dist = abs(d.position - t.position)
            if dist <= match_tolerance_m:
                pairs.append((dist, i, j))
    pairs.sort()
    used_d, used_t = set(), set()
    for _, i, j in pairs:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
    tp = len(used_d)
    return evaluation_from_counts(tp, len(detected) - tp, len(truth) - tp, 0)


def split_lines_by_tiles(lines, mask_width, mask_height, geo, spec=None):
    """Clip full-length lines to each tile column's pixel-center X range.

    Produces ground-truth segments comparable to per-tile detections.
    """
    spec = spec or TileSpec()
    col_ranges = []
    for tc, (c0, c1) in enumerate(spec.column_bounds(mask_width)):
        xa = geo.pixel_to_world(c0, 0)[0]
        xb = geo.pixel_to_world(c1 - 1, 0)[0]
        col_ranges.append((tc, xa, xb))
    row_bounds = spec.row_bounds(mask_height)
    out = []
    for ln in lines:
        lx0, lx1 = ln.x_range
        row_px = geo.world_to_pixel(0.0, ln.position)[1]
        tile_row = None
        for tr, (r0, r1) in enumerate(row_bounds):
            if r0 - 0.5 <= row_px < r1 - 0.5:
                tile_row = tr
                break
        for tc, xa, xb in col_ranges:
            x0, x1 = max(lx0, xa), min(lx1, xb)
            if x1 > x0:
                out.append(RowLine(x0, ln.y1, x1, ln.y2, tc, tile_row, None))
    return out


# -------------------------------------------------------------------- CSV

def write_lines_csv(lines, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LINES_CSV_HEADER)
        for ln in lines:
            w.writerow([repr(float(ln.x1)), repr(float(ln.y1)), repr(float(ln.x2)), repr(float(ln.y2)),
                        "" if ln.tile_col is None else ln.tile_col,
                        "" if ln.tile_row is None else ln.tile_row,
                        "" if ln.peak_row_px is None else ln.peak_row_px])


def read_lines_csv(path):
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"x1_m", "y1_m", "x2_m", "y2_m"} - set(reader.fieldnames or [])
        if missing:
            raise FormatError(f"missing columns {sorted(missing)}", f"{path}:1")
        for lineno, rec in enumerate(reader, start=2):
            try:
                vals = [float(rec[k]) for k in ("x1_m", "y1_m", "x2_m", "y2_m")]
                opt = [int(rec[k]) if rec.get(k) not in (None, "") else None
                       for k in ("tile_col", "tile_row", "peak_row_px")]
            except (TypeError, ValueError) as exc:
                raise FormatError(str(exc), f"{path}:{lineno}") from None
            if not all(map(math.isfinite, vals)):
                raise FormatError("non-finite coordinate", f"{path}:{lineno}")
            out.append(RowLine(*vals, *opt))
    return out
