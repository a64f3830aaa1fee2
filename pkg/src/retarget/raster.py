"""Raster primitives: image I/O, luminance, discrete gradients, normalization
and bilinear resampling.

Images are stored as float64 arrays of shape ``(height, width, channels)``
with values in ``[0, 1]``. Scalar fields are plain 2-D float arrays.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import png

MIN_SIZE = 2


class ImageError(ValueError):
    """Raised for unreadable, unsupported or malformed images."""


@dataclass(frozen=True)
class RasterImage:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ImageError(f"expected (h, w, 1|3) pixel array, got shape {data.shape}")
        h, w, _ = data.shape
        if h < MIN_SIZE or w < MIN_SIZE:
            raise ImageError(f"image must be at least {MIN_SIZE}x{MIN_SIZE}, got {w}x{h}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise ImageError("pixel values must lie in [0, 1]")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    __hash__ = None


def check_field(f: np.ndarray, name: str = "field") -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite values")
    return f


# --- decoding -------------------------------------------------------------

_PNM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_pnm(raw: bytes) -> np.ndarray:
    magic = raw[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageError(f"unsupported PNM variant {magic!r} (binary P5/P6 only)")
    pos = 2
    fields = []
    for _ in range(3):
        m = _PNM_TOKEN.match(raw, pos)
        if m is None:
            raise ImageError("truncated PNM header")
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise ImageError(f"malformed PNM header field {m.group(1)!r}") from None
        pos = m.end()
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if not 0 < maxval < 65536:
        raise ImageError(f"invalid PNM maxval {maxval}")
    channels = 1 if magic == b"P5" else 3
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    if len(raw) - pos < count * dtype.itemsize:
        raise ImageError("truncated PNM pixel data")
    body = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return body.reshape(height, width, channels).astype(np.float64) / maxval


def _read_png(path: Path) -> np.ndarray:
    try:
        width, height, rows, info = png.Reader(filename=str(path)).asDirect()
        rows = np.vstack([np.asarray(r, dtype=np.float64) for r in rows]) if height else np.zeros((0, 0))
    except png.Error as exc:
        raise ImageError(f"cannot decode PNG {path}: {exc}") from exc
    planes = info["planes"]
    maxval = 2 ** info["bitdepth"] - 1
    data = rows.reshape(height, width, planes) / maxval
    if info.get("alpha"):
        data = data[:, :, :-1]
    return data


def decode_image(path) -> RasterImage:
    """Read a PNG (8/16-bit, gray/RGB, alpha dropped) or binary PGM/PPM."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ImageError(f"cannot read {path}: {exc}") from exc
    if raw.startswith(b"\x89PNG"):
        data = _read_png(path)
    elif raw[:1] == b"P":
        data = _read_pnm(raw)
    else:
        raise ImageError(f"unsupported image format: {path}")
    if data.size == 0:
        raise ImageError(f"zero-sized image: {path}")
    return RasterImage(data)


def quantize(img: RasterImage) -> np.ndarray:
    """8-bit quantization with round-half-up."""
    return np.floor(img.data * 255.0 + 0.5).astype(np.uint8)


def encode_image(img: RasterImage, path) -> None:
    """Write ``img`` as an 8-bit PNG."""
    q = quantize(img)
    h, w, c = q.shape
    writer = png.Writer(width=w, height=h, greyscale=(c == 1), bitdepth=8)
    try:
        with open(path, "wb") as fh:
            writer.write(fh, q.reshape(h, w * c))
    except OSError as exc:
        raise ImageError(f"cannot write {path}: {exc}") from exc


def field_to_image(f: np.ndarray) -> RasterImage:
    """Wrap a field as a grayscale image, clipping into [0, 1]."""
    return RasterImage(np.clip(check_field(f), 0.0, 1.0))


# --- scalar operators ----------------------------------------------------

BT601 = np.array([0.299, 0.587, 0.114])


def to_luminance(img: RasterImage) -> np.ndarray:
    if img.channels == 1:
        return img.data[:, :, 0].copy()
    return img.data @ BT601


def gradient_energy(f: np.ndarray, norm: str = "L1") -> np.ndarray:
    """Forward-difference gradient magnitude; the last column/row difference is 0."""
    f = check_field(f)
    if min(f.shape) < MIN_SIZE:
        raise ValueError("gradient_energy needs at least a 2x2 field")
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    gx[:, :-1] = f[:, 1:] - f[:, :-1]
    gy[:-1, :] = f[1:, :] - f[:-1, :]
    if norm == "L1":
        return np.abs(gx) + np.abs(gy)
    if norm == "L2":
        return np.sqrt(gx * gx + gy * gy)
    raise ValueError(f"unknown norm {norm!r}")


def normalize_unit(f: np.ndarray) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant field maps to zeros."""
    f = np.asarray(f, dtype=np.float64)
    if f.size == 0:
        raise ValueError("cannot normalize an empty field")
    lo, hi = f.min(), f.max()
    if hi == lo:
        return np.zeros_like(f)
    out = (f - lo) / (hi - lo)
    # rounding can lift near-maximal entries to 1.0; keep the maximum unique
    top = f == hi
    out[~top] = np.minimum(out[~top], np.nextafter(1.0, 0.0))
    out[top] = 1.0
    return out


# --- resampling ----------------------------------------------------------

def sample_bilinear(data: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Bilinear lookup at fractional index coordinates, clamped to the grid.

    ``data`` is (h, w) or (h, w, c); ``rows``/``cols`` broadcast together.
    """
    h, w = data.shape[:2]
    r = np.clip(rows, 0.0, h - 1)
    c = np.clip(cols, 0.0, w - 1)
    r0 = np.minimum(np.floor(r).astype(np.intp), h - 2 if h > 1 else 0)
    c0 = np.minimum(np.floor(c).astype(np.intp), w - 2 if w > 1 else 0)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    if data.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]
    top = data[r0, c0] * (1 - fc) + data[r0, c1] * fc
    bot = data[r1, c0] * (1 - fc) + data[r1, c1] * fc
    return top * (1 - fr) + bot * fr


def resample_array(data: np.ndarray, w: int, h: int) -> np.ndarray:
    """Align-corners-false bilinear resize of a (h, w[, c]) array."""
    src_h, src_w = data.shape[:2]
    if (src_w, src_h) == (w, h):
        return np.array(data, dtype=np.float64)
    ys = (np.arange(h) + 0.5) * (src_h / h) - 0.5
    xs = (np.arange(w) + 0.5) * (src_w / w) - 0.5
    return sample_bilinear(np.asarray(data, dtype=np.float64), ys[:, None], xs[None, :])


def resample_bilinear(img: RasterImage, w: int, h: int) -> RasterImage:
    if w < MIN_SIZE or h < MIN_SIZE:
        raise ValueError(f"target size must be at least {MIN_SIZE}x{MIN_SIZE}")
    out = resample_array(img.data, w, h)
    return RasterImage(np.clip(out, 0.0, 1.0))
