"""Numerical laboratory for the vectorial p-Laplacian eigenvalue problem."""

__version__ = "0.1.0"
