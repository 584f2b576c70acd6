"""JSON command engine: envelope parsing, decomposition, response assembly."""

from .engine import QueryEngine

__all__ = ["QueryEngine"]
