"""Feature-vector sets with exact nearest-neighbor search."""

from .index import DescriptorSet, SearchHit
from .store import DescriptorStore, DescriptorTxn

__all__ = ["DescriptorSet", "DescriptorStore", "DescriptorTxn", "SearchHit"]
