"""Rectangle feature-collection helpers shared by prescription and as-applied documents."""

import json
import math
from pathlib import Path

from .errors import FormatError

DEFAULT_CRS = "LOCAL:planar-meters"


def rect_ring(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]


def ring_to_rect(geometry, context):
    """Validate a closed axis-aligned rectangle ring and return ``(x0, y0, x1, y1)``."""
    if not isinstance(geometry, dict) or geometry.get("type") != "Polygon":
        raise FormatError("geometry must be a Polygon", context)
    coords = geometry.get("coordinates")
    if not isinstance(coords, list) or len(coords) != 1:
        raise FormatError("polygon must have exactly one ring", context)
    ring = coords[0]
    if not isinstance(ring, list) or len(ring) != 5:
        raise FormatError("ring must hold 5 positions", context)
    try:
        pts = [(float(p[0]), float(p[1])) for p in ring]
    except (TypeError, ValueError, IndexError):
        raise FormatError("ring positions must be [x, y] numbers", context) from None
    if not all(math.isfinite(v) for p in pts for v in p):
        raise FormatError("non-finite coordinate", context)
    if pts[0] != pts[4]:
        raise FormatError("ring is not closed", context)
    xs = sorted({p[0] for p in pts[:4]})
    ys = sorted({p[1] for p in pts[:4]})
    if len(xs) != 2 or len(ys) != 2:
        raise FormatError("ring is not an axis-aligned rectangle", context)
    corners = {(x, y) for x in xs for y in ys}
    if set(pts[:4]) != corners:
        raise FormatError("ring is not an axis-aligned rectangle", context)
    # consecutive vertices must share one coordinate (no crossing "bow-tie" order)
    for p, q in zip(pts[:4], pts[1:]):
        if p[0] != q[0] and p[1] != q[1]:
            raise FormatError("ring edges cross (self-overlapping ring)", context)
    return xs[0], ys[0], xs[1], ys[1]


def feature(x0, y0, x1, y1, properties):
    return {"type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [rect_ring(x0, y0, x1, y1)]},
            "properties": properties}


def dump(doc, path):
    Path(path).write_text(json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n")


def load(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise FormatError("document is not a FeatureCollection", str(path))
    feats = doc.get("features")
    if not isinstance(feats, list):
        raise FormatError("'features' must be a list", str(path))
    return doc, feats


def crs_member(name):
    return {"type": "name", "properties": {"name": name}}
