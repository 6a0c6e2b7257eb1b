"""Benchmark toolkit for characterizing partition-comparison measures."""

__version__ = "0.1.0"
