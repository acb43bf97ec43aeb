"""Raster data model, affine georeferencing, excess-green index and thresholding.

Pixel arrays are stored row-major as ``(height, width[, bands])`` numpy
arrays. Georeferencing follows the ESRI world-file convention: the origin is
the world position of the *center* of the upper-left pixel and rows run
southwards (negative ``pixel_size_y``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, GeoreferenceError, InvalidInputError, OutOfBoundsError

__all__ = [
    "GeoTransform",
    "Raster",
    "ScalarField",
    "BinaryMask",
    "compute_exgi",
    "exgi_from_bands",
    "threshold_mask",
    "pixel_to_world",
    "world_to_pixel",
    "sample_index",
    "load_raster",
    "save_raster",
    "load_mask",
    "save_mask",
    "load_field",
    "save_field",
    "read_world_file",
    "write_world_file",
    "world_file_path",
]

DEFAULT_THRESHOLD = 0.08
_EXGI_CHUNK_ROWS = 512


@dataclass(frozen=True)
class GeoTransform:
    """Axis-aligned affine pixel <-> world mapping (meters)."""

    origin_x: float
    origin_y: float
    pixel_size_x: float
    pixel_size_y: float

    def __post_init__(self):
        if not self.pixel_size_x > 0:
            raise InvalidInputError(f"pixel_size_x must be > 0, got {self.pixel_size_x}")
        if not self.pixel_size_y < 0:
            raise InvalidInputError(f"pixel_size_y must be < 0, got {self.pixel_size_y}")

    @classmethod
    def north_up(cls, origin_x, origin_y, gsd):
        return cls(float(origin_x), float(origin_y), float(gsd), -float(gsd))

    @property
    def pixel_area(self):
        return self.pixel_size_x * abs(self.pixel_size_y)

    def pixel_to_world(self, col, row):
        return (self.origin_x + col * self.pixel_size_x,
                self.origin_y + row * self.pixel_size_y)

    def world_to_pixel(self, x, y):
        return ((x - self.origin_x) / self.pixel_size_x,
                (y - self.origin_y) / self.pixel_size_y)

    def extent(self, width, height):
        """Outer pixel-edge bounds ``(xmin, ymin, xmax, ymax)`` of a ``width x height`` grid."""
        hx = 0.5 * self.pixel_size_x
        hy = 0.5 * abs(self.pixel_size_y)
        xmin = self.origin_x - hx
        xmax = self.origin_x + (width - 1) * self.pixel_size_x + hx
        ymax = self.origin_y + hy
        ymin = self.origin_y + (height - 1) * self.pixel_size_y - hy
        return (xmin, ymin, xmax, ymax)

    def shifted(self, col_offset, row_offset):
        """Geotransform of a sub-window starting at ``(col_offset, row_offset)``."""
        x, y = self.pixel_to_world(col_offset, row_offset)
        return GeoTransform(x, y, self.pixel_size_x, self.pixel_size_y)

    def to_world_file_lines(self):
        return [repr(float(v)) for v in
                (self.pixel_size_x, 0.0, 0.0, self.pixel_size_y, self.origin_x, self.origin_y)]


def pixel_to_world(geo, col, row):
    return geo.pixel_to_world(col, row)


def world_to_pixel(geo, x_m, y_m):
    """Inverse affine map; returns fractional ``(col, row)``."""
    return geo.world_to_pixel(x_m, y_m)


def sample_index(geo, x_m, y_m, width, height):
    """Integer pixel index containing world point ``(x_m, y_m)``.

    Raises OutOfBoundsError when the point is outside the raster.
    """
    col, row = geo.world_to_pixel(x_m, y_m)
    c = math.floor(col + 0.5)
    r = math.floor(row + 0.5)
    if not (0 <= c < width and 0 <= r < height):
        raise OutOfBoundsError(f"world point ({x_m}, {y_m}) maps to pixel ({c}, {r}) "
                               f"outside {width}x{height} raster")
    return c, r


@dataclass(frozen=True, eq=False)
class Raster:
    """Multi-band pixel grid. ``samples`` has shape ``(height, width, bands)``."""

    samples: np.ndarray
    geo: GeoTransform

    def __post_init__(self):
        s = self.samples
        if s.ndim == 2:
            object.__setattr__(self, "samples", s[:, :, None])
            s = self.samples
        if s.ndim != 3 or s.shape[0] < 1 or s.shape[1] < 1:
            raise InvalidInputError(f"raster samples must be (h, w, bands), got shape {s.shape}")

    @property
    def height(self):
        return self.samples.shape[0]

    @property
    def width(self):
        return self.samples.shape[1]

    @property
    def bands(self):
        return self.samples.shape[2]


@dataclass(frozen=True, eq=False)
class ScalarField:
    values: np.ndarray
    geo: GeoTransform

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """One flag per pixel; ``bits`` is a boolean ``(height, width)`` array."""

    bits: np.ndarray
    geo: GeoTransform

    def __post_init__(self):
        if self.bits.dtype != np.bool_:
            object.__setattr__(self, "bits", self.bits.astype(bool))
        if self.bits.ndim != 2:
            raise InvalidInputError(f"mask must be 2-D, got shape {self.bits.shape}")

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    def popcount(self):
        return int(np.count_nonzero(self.bits))

    def extent(self):
        return self.geo.extent(self.width, self.height)

    def same_grid(self, other):
        return self.bits.shape == other.bits.shape and self.geo == other.geo


def exgi_from_bands(red, green, blue):
    """Excess green ``2g - r - b`` on chromaticity-normalised bands.

    Computed as ``3g - 1`` which is algebraically identical (r + g + b = 1)
    and keeps every result inside [-1, 2] under floating-point rounding.
    Pixels with ``R + G + B == 0`` get 0.
    """
    red = np.asarray(red, dtype=np.float64)
    green = np.asarray(green, dtype=np.float64)
    blue = np.asarray(blue, dtype=np.float64)
    total = red + green + blue
    out = np.zeros(np.broadcast(red, green, blue).shape, dtype=np.float64)
    nz = total > 0
    g = np.divide(green, total, out=np.zeros_like(out), where=nz)
    np.subtract(3.0 * g, 1.0, out=out, where=nz)
    return out


def compute_exgi(rgb):
    """Excess green index of a 3-band raster as a float32 field sharing its geo."""
    if rgb.bands != 3:
        raise InvalidInputError(f"compute_exgi needs a 3-band raster, got {rgb.bands} band(s)")
    values = np.empty((rgb.height, rgb.width), dtype=np.float32)
    for r0 in range(0, rgb.height, _EXGI_CHUNK_ROWS):
        block = rgb.samples[r0:r0 + _EXGI_CHUNK_ROWS]
        values[r0:r0 + _EXGI_CHUNK_ROWS] = exgi_from_bands(block[..., 0], block[..., 1], block[..., 2])
    return ScalarField(values, rgb.geo)


def threshold_mask(field, t=DEFAULT_THRESHOLD):
    """Vegetation mask: ``value >= t``.

    The threshold is cast to the field's dtype first so a float32 field filled
    with ``t`` compares equal to ``t``.
    """
    values = np.asarray(field.values)
    return BinaryMask(values >= np.asarray(t, dtype=values.dtype), field.geo)


# ---------------------------------------------------------------- file I/O

def world_file_path(path):
    path = Path(path)
    ext = path.suffix.lower()
    # ESRI rule: first and last letter of the extension plus "w" (.png -> .pgw)
    wext = "." + ext[1] + ext[-1] + "w" if len(ext) >= 3 else ext + "w"
    return path.with_suffix(wext)


def read_world_file(path):
    path = Path(path)
    if not path.exists():
        raise GeoreferenceError(f"world file not found: {path}")
    try:
        vals = [float(line) for line in path.read_text().split()]
    except ValueError as exc:
        raise GeoreferenceError(f"malformed world file {path}: {exc}") from None
    if len(vals) != 6:
        raise GeoreferenceError(f"world file {path} must hold 6 numbers, found {len(vals)}")
    a, d, b, e, c, f = vals
    if d != 0.0 or b != 0.0:
        raise GeoreferenceError(f"rotated world file not supported: {path}")
    try:
        return GeoTransform(c, f, a, e)
    except InvalidInputError as exc:
        raise GeoreferenceError(f"{path}: {exc}") from None


def write_world_file(geo, path):
    Path(path).write_text("\n".join(geo.to_world_file_lines()) + "\n")


def _open_image(path):
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            return im.copy()
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from None


def load_raster(path, geo=None):
    """Read a PNG and its world file. RGBA/palette images are reduced to RGB."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if geo is None:
        geo = read_world_file(world_file_path(path))
    im = _open_image(path)
    if im.mode in ("P", "RGBA", "LA", "CMYK"):
        im = im.convert("RGB" if im.mode != "LA" else "L")
    arr = np.asarray(im)
    return Raster(arr, geo)


def save_raster(raster, path):
    path = Path(path)
    samples = raster.samples
    if samples.dtype != np.uint8:
        raise InvalidInputError("only 8-bit rasters can be written as PNG")
    arr = samples[:, :, 0] if raster.bands == 1 else samples
    Image.fromarray(np.ascontiguousarray(arr)).save(path, format="PNG")
    write_world_file(raster.geo, world_file_path(path))


def save_mask(mask, path):
    """Write a mask as 0/255 single-band PNG plus world file."""
    path = Path(path)
    img = Image.fromarray(np.where(mask.bits, np.uint8(255), np.uint8(0)), mode="L")
    img.save(path, format="PNG")
    write_world_file(mask.geo, world_file_path(path))


def load_mask(path):
    r = load_raster(path)
    if r.bands != 1:
        raise InvalidInputError(f"mask file {path} has {r.bands} bands, expected 1")
    return BinaryMask(r.samples[:, :, 0] > 0, r.geo)


def _range_path(path):
    return Path(path).with_suffix(".range.txt")


def save_field(field, path):
    """16-bit PNG with values affinely mapped onto [0, 65535].

    The min/max needed to undo the mapping go to a ``.range.txt`` sidecar.
    """
    path = Path(path)
    v = np.asarray(field.values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    scale = (hi - lo) if hi > lo else 1.0
    q = np.rint((v - lo) / scale * 65535.0).astype(np.uint16)
    Image.fromarray(q).save(path, format="PNG")
    _range_path(path).write_text(f"min={lo!r}\nmax={hi!r}\n")
    write_world_file(field.geo, world_file_path(path))


def load_field(path):
    path = Path(path)
    geo = read_world_file(world_file_path(path))
    rng = {}
    for line in _range_path(path).read_text().splitlines():
        k, _, v = line.partition("=")
        rng[k.strip()] = float(v)
    q = np.asarray(_open_image(path)).astype(np.float64)
    lo, hi = rng["min"], rng["max"]
    scale = (hi - lo) if hi > lo else 1.0
    return ScalarField((lo + q / 65535.0 * scale).astype(np.float32), geo)
