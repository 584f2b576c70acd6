"""Embedded transactional property-graph store."""

from .model import Constraint, Edge, Node, ResultSpec
from .store import GraphStore, Transaction
from .values import BlobRef

__all__ = [
    "BlobRef",
    "Constraint",
    "Edge",
    "GraphStore",
    "Node",
    "ResultSpec",
    "Transaction",
]
