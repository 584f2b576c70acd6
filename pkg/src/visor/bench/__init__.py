"""Dataset generator, ingest tooling, and the query benchmark harness."""

from .harness import BenchReport, BenchRow, run_queries
from .synth import CohortParams, generate

__all__ = ["BenchReport", "BenchRow", "CohortParams", "generate", "run_queries"]
