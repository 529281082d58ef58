"""Consistent-histories toolkit for finite-dimensional quantum models."""
__version__ = "0.1.0"
