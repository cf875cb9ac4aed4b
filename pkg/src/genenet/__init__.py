"""Genetic node identity for ad hoc sensor networks: gene pools, kinship-based key transfer and recognition."""

__version__ = "0.1.0"
