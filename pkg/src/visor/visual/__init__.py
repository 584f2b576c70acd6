"""Image storage and server-side transformations."""

from .ops import Crop, Resize, Threshold, apply_ops, crop, resize, threshold
from .store import BlobStore, ImageRecord, VisualStore
from .tiled import TiledReader, decode_tiled, encode_tiled

__all__ = [
    "BlobStore",
    "Crop",
    "ImageRecord",
    "Resize",
    "Threshold",
    "TiledReader",
    "VisualStore",
    "apply_ops",
    "crop",
    "decode_tiled",
    "encode_tiled",
    "resize",
    "threshold",
]
