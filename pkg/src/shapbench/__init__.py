"""Benchmark for Shapley-value feature attribution estimators on tabular data."""

__version__ = "0.1.0"
