"""Orientation estimation for projection images of cyclically symmetric objects."""

__version__ = "0.1.0"
