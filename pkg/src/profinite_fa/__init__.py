"""Exact verification kernels for SL(4, Z[1/p]) and an S-arithmetic subgroup of SL(2, A)."""

__version__ = "0.1.0"
