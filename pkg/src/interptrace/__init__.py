"""Numerics for scaling classes, subordinators, weights and generalized real interpolation."""

__version__ = "0.1.0"
