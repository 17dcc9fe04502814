"""Exact Wigner-function dynamics of a bosonic mode coupled to a bosonic bath."""

__version__ = "0.1.0"
