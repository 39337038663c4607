"""Replication prediction-market replay, survey aggregation, and evaluation."""

__version__ = "0.1.0"
