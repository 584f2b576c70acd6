"""Encode/decode between pixel arrays and the supported container formats.

PNG and JPEG go through Pillow; VDTI is ours.  Decoding sniffs the magic
bytes, so blobs are self-describing.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DecodeError, UnsupportedFormatError
from . import tiled
from .ops import image_dims

PNG = "png"
JPEG = "jpeg"
TILED = "tiled"

FORMATS = (PNG, JPEG, TILED)

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"

JPEG_QUALITY = 90  # jpeg output is best-effort; the lossless paths are png/tiled


def sniff(data: bytes) -> str | None:
    if data.startswith(_PNG_MAGIC):
        return PNG
    if data.startswith(_JPEG_MAGIC):
        return JPEG
    if data.startswith(tiled.MAGIC):
        return TILED
    return None


def _to_pil(pixels: np.ndarray) -> Image.Image:
    _, _, channels = image_dims(pixels)
    if channels == 1:
        return Image.fromarray(pixels.reshape(pixels.shape[0], pixels.shape[1]), "L")
    return Image.fromarray(pixels, "RGB")


def encode(pixels: np.ndarray, fmt: str, tile_size: int = 128) -> bytes:
    if fmt == TILED:
        return tiled.encode_tiled(pixels, tile_size)
    if fmt == PNG:
        buf = io.BytesIO()
        _to_pil(pixels).save(buf, format="PNG")
        return buf.getvalue()
    if fmt == JPEG:
        buf = io.BytesIO()
        _to_pil(pixels).save(buf, format="JPEG", quality=JPEG_QUALITY)
        return buf.getvalue()
    raise UnsupportedFormatError(f"unsupported image format {fmt!r}")


def decode(data: bytes) -> np.ndarray:
    """Decode any supported container to a uint8 array, (h, w) or (h, w, 3)."""
    fmt = sniff(data)
    if fmt == TILED:
        return tiled.decode_tiled(data)
    if fmt is None:
        raise DecodeError("unrecognized image data")
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"broken {fmt} data: {exc}") from exc
    if img.mode == "L":
        return np.asarray(img, np.uint8)
    if img.mode != "RGB":
        img = img.convert("L") if img.mode in ("1", "I", "I;16", "F") else img.convert("RGB")
    return np.asarray(img, np.uint8)
