"""Proof-of-Commitment consensus primitives and simulation harness."""

__version__ = "0.1.0"
