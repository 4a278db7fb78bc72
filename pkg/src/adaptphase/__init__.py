"""Adaptive and non-adaptive single-qubit phase estimation, with exact limits."""

__version__ = "0.1.0"
