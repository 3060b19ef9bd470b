"""Image decoding and preprocessing.

Images are numpy arrays of shape (height, width, 3), dtype uint8, RGB
channel order, row-major. Network inputs ("tensors") are float64 arrays.
All functions are pure.
"""

from __future__ import annotations

import base64
import binascii
import io
import math
import re

import numpy as np
from PIL import Image as PilImage
from PIL import UnidentifiedImageError

from faceauth.errors import FaceAuthError


class ImagingError(FaceAuthError):
    """Base class for decoding/preprocessing failures."""


class MalformedUri(ImagingError):
    """URI does not start with a supported image data-URI prefix."""


class UnsupportedFormat(ImagingError):
    """Image media type is not PNG or JPEG."""


class CorruptPayload(ImagingError):
    """Base64 or image codec failure."""


class EmptyBox(ImagingError):
    """Crop box has zero or negative area after rounding."""


_DATA_URI_RE = re.compile(r"^data:image/([a-z0-9.+-]+);base64,(.*)$", re.IGNORECASE | re.DOTALL)
_SUPPORTED_FORMATS = frozenset({"png", "jpeg"})


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the (h, w, 3) uint8 contract; returns the array unchanged."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImagingError(f"expected (h, w, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImagingError(f"image dimensions must be >= 1, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ImagingError(f"expected uint8 pixels, got {arr.dtype}")
    return arr


def decode_image_bytes(data: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes into an RGB image.

    An alpha channel, if present, is composited on black.

    Raises:
        CorruptPayload: if the codec cannot decode the bytes.
    """
    try:
        with PilImage.open(io.BytesIO(data)) as pil:
            pil.load()
            if pil.mode in ("RGBA", "LA", "PA") or (pil.mode == "P" and "transparency" in pil.info):
                rgba = pil.convert("RGBA")
                black = PilImage.new("RGBA", rgba.size, (0, 0, 0, 255))
                pil = PilImage.alpha_composite(black, rgba)
            rgb = pil.convert("RGB")
            return np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise CorruptPayload(f"image decode failed: {exc}") from exc


def parse_data_uri(uri: str) -> np.ndarray:
    """Decode a browser-style image data URI into an RGB image.

    Accepts exactly the form emitted by canvas export:
    "data:image/png;base64,..." or "data:image/jpeg;base64,...".

    Raises:
        MalformedUri: missing or non-image data-URI prefix.
        UnsupportedFormat: image format other than png/jpeg.
        CorruptPayload: invalid base64 or codec failure.
    """
    match = _DATA_URI_RE.match(uri)
    if match is None:
        raise MalformedUri("expected 'data:image/<fmt>;base64,' prefix")
    fmt = match.group(1).lower()
    if fmt not in _SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"unsupported image format {fmt!r} (need png or jpeg)")
    try:
        payload = base64.b64decode(match.group(2), validate=True)
    except (binascii.Error, ValueError) as exc:
        raise CorruptPayload(f"invalid base64 payload: {exc}") from exc
    return decode_image_bytes(payload)


def _axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel-center sampling: src = (dst + 0.5) * n_in/n_out - 0.5.
    # At n_in == n_out this is the identity, so resizing to the same size
    # returns the pixels untouched.
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src)
    frac = src - base
    i0 = np.clip(base, 0, n_in - 1).astype(np.intp)
    i1 = np.clip(base + 1, 0, n_in - 1).astype(np.intp)
    return i0, i1, frac


def resize(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize to exactly (width, height).

    uint8 input gives uint8 output (rounded half up); float input stays
    float64.
    """
    if width < 1 or height < 1:
        raise ValueError(f"target size must be >= 1, got {width}x{height}")
    arr = np.asarray(img)
    h_in, w_in = arr.shape[:2]
    if h_in == height and w_in == width:
        return arr.copy()
    r0, r1, ty = _axis_coords(h_in, height)
    c0, c1, tx = _axis_coords(w_in, width)
    px = arr.astype(np.float64)
    a = px[np.ix_(r0, c0)]
    b = px[np.ix_(r0, c1)]
    c = px[np.ix_(r1, c0)]
    d = px[np.ix_(r1, c1)]
    wx = tx.reshape(1, -1, *([1] * (arr.ndim - 2)))
    wy = ty.reshape(-1, 1, *([1] * (arr.ndim - 2)))
    out = (a * (1 - wx) + b * wx) * (1 - wy) + (c * (1 - wx) + d * wx) * wy
    if arr.dtype == np.uint8:
        return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out


def crop(img: np.ndarray, box) -> np.ndarray:
    """Extract a box from the image, zero-padding out-of-bounds regions.

    `box` is any (x1, y1, x2, y2) sequence in pixel coordinates. The
    window origin is (round(x1), round(y1)) and the output dims are the
    box dims rounded to integers (round half up), so square boxes always
    crop square.

    Raises:
        EmptyBox: box rounds to zero or negative area.
    """
    arr = np.asarray(img)
    x1, y1, x2, y2 = (float(v) for v in box)
    ox = _round_half_up(x1)
    oy = _round_half_up(y1)
    out_w = _round_half_up(x2 - x1)
    out_h = _round_half_up(y2 - y1)
    if out_w <= 0 or out_h <= 0:
        raise EmptyBox(f"box {(x1, y1, x2, y2)} rounds to {out_w}x{out_h}")
    out_shape = (out_h, out_w) + arr.shape[2:]
    out = np.zeros(out_shape, dtype=arr.dtype)
    h, w = arr.shape[:2]
    sx0, sx1 = max(ox, 0), min(ox + out_w, w)
    sy0, sy1 = max(oy, 0), min(oy + out_h, h)
    if sx1 > sx0 and sy1 > sy0:
        out[sy0 - oy:sy1 - oy, sx0 - ox:sx1 - ox] = arr[sy0:sy1, sx0:sx1]
    return out


def prewhiten(img: np.ndarray) -> np.ndarray:
    """Standardize pixel values: (x - mean) / max(std, 1/sqrt(N)).

    N is the total pixel-value count (h*w*channels). The std floor keeps
    constant images finite (they come out all-zero). Output is float64
    with the same (h, w, 3) shape.
    """
    x = np.asarray(img, dtype=np.float64)
    mean = x.mean()
    std = x.std()
    adj = max(std, 1.0 / math.sqrt(x.size))
    return (x - mean) / adj
