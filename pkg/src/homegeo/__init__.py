"""Minimal-surface laboratory for the homogeneous geometries Nil3 and Sol3."""

__version__ = "0.1.0"
