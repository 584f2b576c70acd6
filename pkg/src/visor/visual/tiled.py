"""VDTI: the tiled lossless image format.

An image is split into a row-major grid of square tiles so that a
rectangular region can be read by decoding only the tiles it intersects.
Each tile is deflate-compressed independently and stored raw instead when
compression does not help.

Layout (all integers little-endian):

    magic "VDTI" (4 bytes)
    version     u16   (currently 1)
    width       u32
    height      u32
    channels    u8    (1 or 3)
    bit_depth   u8    (8)
    tile_size   u16   (power of two)
    directory   ceil(h/ts) * ceil(w/ts) entries, row-major:
                    offset u64 (absolute), length u32, compressed u8
    payloads    tile pixel bytes, row-major within each tile

Edge tiles are stored at their clipped size, so concatenating the decoded
grid reproduces the original array bit for bit.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from ..errors import DecodeError, UnsupportedFormatError
from .ops import image_dims

MAGIC = b"VDTI"
VERSION = 1

_HEADER = struct.Struct("<4sHIIBBH")
_DIR_ENTRY = struct.Struct("<QIB")


def _grid(width: int, height: int, tile_size: int) -> tuple[int, int]:
    return -(-height // tile_size), -(-width // tile_size)  # rows, cols


def encode_tiled(pixels: np.ndarray, tile_size: int = 128) -> bytes:
    """Encode a uint8 pixel array; tile_size must be a power of two."""
    if tile_size < 1 or tile_size > 0xFFFF or tile_size & (tile_size - 1):
        raise UnsupportedFormatError(f"tile_size {tile_size} is not a power of two")
    width, height, channels = image_dims(pixels)
    arr = pixels if pixels.ndim == 3 else pixels[:, :, np.newaxis]
    arr = np.ascontiguousarray(arr)

    rows, cols = _grid(width, height, tile_size)
    header = _HEADER.pack(MAGIC, VERSION, width, height, channels, 8, tile_size)
    directory = bytearray()
    payloads = bytearray()
    offset = len(header) + rows * cols * _DIR_ENTRY.size
    for r in range(rows):
        for c in range(cols):
            tile = arr[
                r * tile_size : min((r + 1) * tile_size, height),
                c * tile_size : min((c + 1) * tile_size, width),
            ]
            raw = tile.tobytes()
            packed = zlib.compress(raw, 6)
            if len(packed) < len(raw):
                data, compressed = packed, 1
            else:
                data, compressed = raw, 0
            directory += _DIR_ENTRY.pack(offset, len(data), compressed)
            payloads += data
            offset += len(data)
    return header + bytes(directory) + bytes(payloads)


class TiledReader:
    """Random-access reader over an encoded VDTI blob.

    `tiles_read` counts tile decodes, which is how the region-locality
    guarantee (a crop touches only intersecting tiles) is asserted in tests.
    """

    def __init__(self, data: bytes):
        if len(data) < _HEADER.size or data[:4] != MAGIC:
            raise DecodeError("not a VDTI blob")
        magic, version, width, height, channels, bit_depth, tile_size = _HEADER.unpack_from(
            data, 0
        )
        if version != VERSION:
            raise DecodeError(f"unsupported VDTI version {version}")
        if bit_depth != 8 or channels not in (1, 3):
            raise DecodeError(f"unsupported VDTI layout ({channels} ch, {bit_depth} bit)")
        if width < 1 or height < 1 or tile_size < 1:
            raise DecodeError("corrupt VDTI header")
        self.data = data
        self.width = width
        self.height = height
        self.channels = channels
        self.tile_size = tile_size
        self.rows, self.cols = _grid(width, height, tile_size)
        self.tiles_read = 0
        self._dir_offset = _HEADER.size
        dir_end = self._dir_offset + self.rows * self.cols * _DIR_ENTRY.size
        if dir_end > len(data):
            raise DecodeError("truncated VDTI directory")

    def _tile_shape(self, r: int, c: int) -> tuple[int, int]:
        th = min(self.tile_size, self.height - r * self.tile_size)
        tw = min(self.tile_size, self.width - c * self.tile_size)
        return th, tw

    def tile(self, r: int, c: int) -> np.ndarray:
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise DecodeError(f"tile ({r},{c}) outside {self.rows}x{self.cols} grid")
        offset, length, compressed = _DIR_ENTRY.unpack_from(
            self.data, self._dir_offset + (r * self.cols + c) * _DIR_ENTRY.size
        )
        payload = self.data[offset : offset + length]
        if len(payload) != length:
            raise DecodeError("truncated VDTI payload")
        raw = zlib.decompress(payload) if compressed else payload
        th, tw = self._tile_shape(r, c)
        if len(raw) != th * tw * self.channels:
            raise DecodeError("VDTI tile size mismatch")
        self.tiles_read += 1
        return np.frombuffer(raw, np.uint8).reshape(th, tw, self.channels)

    def region(self, x: int, y: int, width: int, height: int) -> np.ndarray:
        """Decode a rectangle, touching only the tiles it intersects."""
        if width < 1 or height < 1 or x < 0 or y < 0:
            raise DecodeError("bad region")
        if x + width > self.width or y + height > self.height:
            raise DecodeError(
                f"region ({x},{y},{width},{height}) outside {self.width}x{self.height}"
            )
        ts = self.tile_size
        out = np.empty((height, width, self.channels), np.uint8)
        for r in range(y // ts, (y + height - 1) // ts + 1):
            for c in range(x // ts, (x + width - 1) // ts + 1):
                tile = self.tile(r, c)
                ty, tx = r * ts, c * ts
                src_y0 = max(y - ty, 0)
                src_x0 = max(x - tx, 0)
                src_y1 = min(y + height - ty, tile.shape[0])
                src_x1 = min(x + width - tx, tile.shape[1])
                out[
                    ty + src_y0 - y : ty + src_y1 - y,
                    tx + src_x0 - x : tx + src_x1 - x,
                ] = tile[src_y0:src_y1, src_x0:src_x1]
        return out[:, :, 0] if self.channels == 1 else out

    def full(self) -> np.ndarray:
        return self.region(0, 0, self.width, self.height)

    @staticmethod
    def intersecting_tiles(
        x: int, y: int, width: int, height: int, tile_size: int
    ) -> int:
        rows = (y + height - 1) // tile_size - y // tile_size + 1
        cols = (x + width - 1) // tile_size - x // tile_size + 1
        return rows * cols


def decode_tiled(data: bytes) -> np.ndarray:
    return TiledReader(data).full()
