"""Tensor-GUE random matrices and their free-probability limit."""

__version__ = "0.1.0"
