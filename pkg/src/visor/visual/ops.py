"""Pixel transformations applied on the read or ingest path.

Images are uint8 numpy arrays shaped (h, w) for grayscale or (h, w, 3) for
RGB.  Transforms never modify their input and are deterministic, which is
what makes transformed retrievals repeatable byte for byte.

Resize kernel rule: when both target dimensions divide the source
dimensions evenly, each output pixel is the box average of its source
block; otherwise separable bilinear interpolation with pixel-center
mapping.  Accumulation happens in float64 and the final rounding is
half-to-even, so a constant image stays constant under any resize and the
2x2 checker [[0,255],[0,255]] collapses to a single pixel of 128.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidOpError


@dataclass(frozen=True)
class Threshold:
    value: int


@dataclass(frozen=True)
class Resize:
    width: int
    height: int


@dataclass(frozen=True)
class Crop:
    x: int
    y: int
    width: int
    height: int


TransformOp = Threshold | Resize | Crop


def image_dims(pixels: np.ndarray) -> tuple[int, int, int]:
    """(width, height, channels) of a pixel array, validating its shape."""
    if pixels.dtype != np.uint8:
        raise InvalidOpError(f"expected uint8 pixels, got {pixels.dtype}")
    if pixels.ndim == 2:
        h, w = pixels.shape
        return w, h, 1
    if pixels.ndim == 3 and pixels.shape[2] in (1, 3):
        h, w, c = pixels.shape
        return w, h, c
    raise InvalidOpError(f"unsupported pixel array shape {pixels.shape}")


def threshold(pixels: np.ndarray, value: int) -> np.ndarray:
    """Zero every pixel strictly below `value`; others pass through."""
    image_dims(pixels)
    if not 0 <= value <= 255:
        raise InvalidOpError(f"threshold value {value} outside [0, 255]")
    return np.where(pixels < value, np.uint8(0), pixels)


def crop(pixels: np.ndarray, x: int, y: int, width: int, height: int) -> np.ndarray:
    w, h, _ = image_dims(pixels)
    if width < 1 or height < 1:
        raise InvalidOpError("crop dimensions must be >= 1")
    if x < 0 or y < 0 or x + width > w or y + height > h:
        raise InvalidOpError(
            f"crop rectangle ({x},{y},{width},{height}) outside {w}x{h} image"
        )
    return pixels[y : y + height, x : x + width].copy()


def resize(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    w, h, _ = image_dims(pixels)
    if width < 1 or height < 1:
        raise InvalidOpError("resize targets must be >= 1")
    if (width, height) == (w, h):
        return pixels.copy()
    squeeze = pixels.ndim == 2
    arr = pixels[:, :, np.newaxis] if squeeze else pixels
    if w % width == 0 and h % height == 0:
        out = _box_downsample(arr, width, height)
    else:
        out = _bilinear(arr, width, height)
    out = np.rint(out).astype(np.uint8)
    return out[:, :, 0] if squeeze else out


def _box_downsample(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    h, w, c = arr.shape
    fy, fx = h // height, w // width
    blocks = arr.reshape(height, fy, width, fx, c).astype(np.float64)
    return blocks.mean(axis=(1, 3))


def _bilinear(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    out = _lerp_axis(arr.astype(np.float64), height, axis=0)
    return _lerp_axis(out, width, axis=1)


def _lerp_axis(arr: np.ndarray, target: int, axis: int) -> np.ndarray:
    n = arr.shape[axis]
    if target == n:
        return arr
    # Pixel-center mapping, clamped at the borders.
    pos = np.clip((np.arange(target) + 0.5) * (n / target) - 0.5, 0.0, n - 1.0)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = pos - i0
    shape = [1, 1, 1]
    shape[axis] = target
    frac = frac.reshape(shape)
    a0 = np.take(arr, i0, axis=axis)
    a1 = np.take(arr, i1, axis=axis)
    # a0 + f*(a1-a0) rather than (1-f)*a0 + f*a1: exact when a0 == a1.
    return a0 + frac * (a1 - a0)


def apply_ops(pixels: np.ndarray, ops) -> np.ndarray:
    """Apply transforms strictly in list order, validating each against the
    dimensions produced by the previous one."""
    for op in ops:
        if isinstance(op, Threshold):
            pixels = threshold(pixels, op.value)
        elif isinstance(op, Resize):
            pixels = resize(pixels, op.width, op.height)
        elif isinstance(op, Crop):
            pixels = crop(pixels, op.x, op.y, op.width, op.height)
        else:
            raise InvalidOpError(f"unknown transform {op!r}")
    return pixels
