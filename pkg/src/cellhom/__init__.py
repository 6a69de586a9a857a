"""Numerical periodic homogenization on Euclidean cells and periodic graphs."""

__version__ = "0.1.0"
