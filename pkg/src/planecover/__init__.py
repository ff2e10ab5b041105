"""Numerical experiments on X-ray support theorems for manifolds with plane covers."""

__version__ = "0.1.0"
