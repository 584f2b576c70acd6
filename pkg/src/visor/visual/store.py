"""Blob persistence and the retrieval pipeline.

Blobs are immutable once written: store_image assigns a fresh locator, and
every transform runs on the read path only, so retrieval is a pure function
of (blob, ops, output format).
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import (
    DimensionMismatchError,
    InvalidOpError,
    UnknownLocatorError,
    UnsupportedFormatError,
)
from . import codecs
from .ops import Crop, apply_ops, image_dims
from .tiled import TiledReader


@dataclass(frozen=True)
class ImageRecord:
    blob_locator: str
    format: str
    width: int
    height: int
    channels: int
    bit_depth: int = 8


_LOCATOR_RE = re.compile(r"^[0-9a-f]{64}-[0-9]{1,9}$")


class BlobStore:
    """One file per blob under a root directory, fanned out by digest prefix.

    Locators are `<sha256 hex>-<n>`: content-addressed with a monotonic
    suffix so that intentionally duplicated content still gets a distinct
    identity.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, locator: str) -> Path:
        # Strict shape check: locators come in off the wire and must never
        # name a path outside the root.
        if not isinstance(locator, str) or not _LOCATOR_RE.match(locator):
            raise UnknownLocatorError(locator)
        return self.root / locator[:2] / locator

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        with self._lock:
            n = 0
            while True:
                locator = f"{digest}-{n}"
                path = self._path(locator)
                if not path.exists():
                    break
                n += 1
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
            # The graph commit that references this locator is fsynced later;
            # the directory entry must already be durable by then.
            fd = os.open(path.parent, os.O_RDONLY)
            try:
                os.fsync(fd)
            finally:
                os.close(fd)
        return locator

    def get(self, locator: str) -> bytes:
        try:
            return self._path(locator).read_bytes()
        except (FileNotFoundError, ValueError):
            raise UnknownLocatorError(locator) from None

    def exists(self, locator: str) -> bool:
        try:
            return self._path(locator).exists()
        except UnknownLocatorError:
            return False

    def delete(self, locator: str) -> None:
        """Best-effort removal, used to clean up aborted ingests."""
        try:
            self._path(locator).unlink()
        except (FileNotFoundError, UnknownLocatorError):
            pass


class VisualStore:
    def __init__(self, root):
        self.blobs = BlobStore(root)

    def store_image(
        self, pixels: np.ndarray, fmt: str = codecs.TILED, tile_size: int = 128
    ) -> ImageRecord:
        if fmt not in codecs.FORMATS:
            raise UnsupportedFormatError(f"unsupported image format {fmt!r}")
        width, height, channels = image_dims(pixels)
        data = codecs.encode(pixels, fmt, tile_size)
        locator = self.blobs.put(data)
        return ImageRecord(locator, fmt, width, height, channels)

    def store_pixel_buffer(
        self,
        buffer: bytes,
        width: int,
        height: int,
        channels: int,
        fmt: str = codecs.TILED,
        tile_size: int = 128,
    ) -> ImageRecord:
        if len(buffer) != width * height * channels:
            raise DimensionMismatchError(
                f"buffer holds {len(buffer)} bytes, expected {width * height * channels}"
            )
        shape = (height, width) if channels == 1 else (height, width, channels)
        return self.store_image(
            np.frombuffer(buffer, np.uint8).reshape(shape), fmt, tile_size
        )

    def load_pixels(self, locator: str) -> np.ndarray:
        return codecs.decode(self.blobs.get(locator))

    def retrieve_image(
        self, locator: str, ops=(), output_format: str = codecs.PNG, timing=None
    ) -> bytes:
        """Load a blob, apply `ops` in order, encode as `output_format`."""
        if output_format not in codecs.FORMATS:
            raise UnsupportedFormatError(f"unsupported output format {output_format!r}")
        ops = tuple(ops)
        with _track(timing, "retrieval"):
            data = self.blobs.get(locator)
            if not ops and codecs.sniff(data) == output_format:
                return data  # byte-exact passthrough
            # Crop-first on a tiled blob reads only the intersecting tiles.
            if ops and isinstance(ops[0], Crop) and codecs.sniff(data) == codecs.TILED:
                head = ops[0]
                reader = TiledReader(data)
                _check_crop(head, reader.width, reader.height)
                pixels = reader.region(head.x, head.y, head.width, head.height)
                ops = ops[1:]
            else:
                pixels = codecs.decode(data)
        with _track(timing, "preprocess"):
            pixels = apply_ops(pixels, ops)
        with _track(timing, "retrieval"):
            return codecs.encode(pixels, output_format)


def _check_crop(op: Crop, width: int, height: int) -> None:
    if (
        op.width < 1
        or op.height < 1
        or op.x < 0
        or op.y < 0
        or op.x + op.width > width
        or op.y + op.height > height
    ):
        raise InvalidOpError(
            f"crop rectangle ({op.x},{op.y},{op.width},{op.height}) "
            f"outside {width}x{height} image"
        )


class _track:
    """Context manager charging elapsed time to a timing collector, if any."""

    def __init__(self, timing, category: str):
        self.timing = timing
        self.category = category

    def __enter__(self):
        if self.timing is not None:
            self._token = self.timing.start(self.category)
        return self

    def __exit__(self, *exc):
        if self.timing is not None:
            self.timing.stop(self._token)
        return False
