"""Exact k-nearest-neighbor search over fixed-dimension float vectors.

Vectors are held as float32 (matching their storage encoding) and every
distance is computed in float64, so results are identical to an exhaustive
scan by construction: there is no approximate path.  Distance ties break by
ascending descriptor id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    DimensionMismatchError,
    NoLabeledEntriesError,
    ValidationError,
)


@dataclass(frozen=True)
class SearchHit:
    descriptor_id: int
    distance: float
    label: str | None
    metadata_node: int | None


class DescriptorSet:
    """A named collection of d-dimensional vectors under L2 distance."""

    def __init__(self, name: str, dimension: int):
        if not name:
            raise ValidationError("descriptor set name must be non-empty")
        if dimension < 1:
            raise ValidationError("descriptor dimension must be >= 1")
        self.name = name
        self.dimension = dimension
        self._vectors = np.empty((0, dimension), np.float32)
        self._labels: list[str | None] = []
        self._nodes: list[int | None] = []

    def __len__(self) -> int:
        return len(self._labels)

    def check_vector(self, vector) -> np.ndarray:
        arr = np.asarray(vector, np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"set {self.name!r} holds {self.dimension}-dim vectors, "
                f"got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("vector components must be finite")
        return arr.astype(np.float32)

    def add(self, vector, label: str | None = None, metadata_node: int | None = None) -> int:
        v = self.check_vector(vector)
        self._vectors = np.concatenate([self._vectors, v[np.newaxis, :]])
        self._labels.append(label)
        self._nodes.append(metadata_node)
        return len(self._labels)  # ids are 1-based insertion order

    def extended(self, pending) -> "DescriptorSet":
        """A new set holding these entries plus `pending` (f32 vec, label,
        node) tuples; the receiver is left untouched, so concurrent readers
        of it stay consistent."""
        clone = DescriptorSet(self.name, self.dimension)
        if pending:
            stacked = np.stack([p[0] for p in pending]).astype(np.float32)
            clone._vectors = np.concatenate([self._vectors, stacked])
        else:
            clone._vectors = self._vectors
        clone._labels = self._labels + [p[1] for p in pending]
        clone._nodes = self._nodes + [p[2] for p in pending]
        return clone

    def entry(self, descriptor_id: int) -> SearchHit:
        i = descriptor_id - 1
        if not 0 <= i < len(self._labels):
            raise ValidationError(f"no descriptor {descriptor_id} in {self.name!r}")
        return SearchHit(descriptor_id, 0.0, self._labels[i], self._nodes[i])

    def knn(self, query, k: int, extra=None) -> list[SearchHit]:
        """The `extra` entries (an overlay of uncommitted additions) are
        searched together with the committed ones."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        qf32 = self.check_vector(query)  # queries quantize like stored vectors
        vectors, labels, nodes = self._vectors, self._labels, self._nodes
        if extra:
            vectors = np.concatenate([vectors, np.stack([e[0] for e in extra])])
            labels = labels + [e[1] for e in extra]
            nodes = nodes + [e[2] for e in extra]
        n = len(labels)
        if n == 0:
            return []
        diff = vectors.astype(np.float64) - qf32.astype(np.float64)
        distances = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        ids = np.arange(1, n + 1)
        order = np.lexsort((ids, distances))[: min(k, n)]
        return [
            SearchHit(int(ids[i]), float(distances[i]), labels[i], nodes[i])
            for i in order
        ]

    def classify(self, query, k: int, extra=None) -> str:
        """Majority label among the k nearest labeled entries.  Vote ties
        break toward the smaller summed distance, then lexicographically."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        labeled = self.knn(query, k=max(k, len(self) + len(extra or ()), 1), extra=extra)
        labeled = [h for h in labeled if h.label is not None][:k]
        if not labeled:
            raise NoLabeledEntriesError(
                f"set {self.name!r} has no labeled entries to vote with"
            )
        votes: dict[str, list] = {}
        for hit in labeled:
            entry = votes.setdefault(hit.label, [0, 0.0])
            entry[0] += 1
            entry[1] += hit.distance
        return min(votes.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))[0]
