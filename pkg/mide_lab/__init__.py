"""Numerical laboratory for mixed local/nonlocal integro-differential equations."""

__version__ = "0.1.0"
