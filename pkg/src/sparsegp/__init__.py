"""Additive sparse Gaussian process regression with compactly supported kernels."""

__version__ = "0.1.0"
