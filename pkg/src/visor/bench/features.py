"""Deterministic 64-dim feature vectors for the classification flow.

A histogram-of-gradients profile: the image is cut into a 2x4 spatial grid
and each cell contributes an 8-bin gradient-orientation histogram weighted
by gradient magnitude, L2-normalized at the end.  No randomness, no model
weights: the same pixels always give the same vector, which keeps the
end-to-end classification tests reproducible.
"""

from __future__ import annotations

import numpy as np

FEATURE_DIM = 64
_GRID = (2, 4)
_BINS = 8


def extract_features(pixels: np.ndarray) -> np.ndarray:
    if pixels.ndim == 3:
        pixels = pixels.mean(axis=2)
    arr = pixels.astype(np.float64)
    gy, gx = np.gradient(arr)
    magnitude = np.hypot(gx, gy)
    orientation = np.arctan2(gy, gx)  # -pi..pi
    bins = np.minimum((orientation + np.pi) / (2 * np.pi) * _BINS, _BINS - 1).astype(int)

    h, w = arr.shape
    rows, cols = _GRID
    vector = np.zeros(FEATURE_DIM, np.float64)
    for r in range(rows):
        for c in range(cols):
            cell = (
                slice(r * h // rows, (r + 1) * h // rows),
                slice(c * w // cols, (c + 1) * w // cols),
            )
            hist = np.bincount(
                bins[cell].ravel(), weights=magnitude[cell].ravel(), minlength=_BINS
            )
            vector[(r * cols + c) * _BINS : (r * cols + c + 1) * _BINS] = hist[:_BINS]
    norm = np.linalg.norm(vector)
    if norm > 0:
        vector /= norm
    return vector.astype(np.float32)
