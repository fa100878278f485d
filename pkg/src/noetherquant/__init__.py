"""Symmetry-preserving quantization of linearizable oscillators, checked symbolically and numerically."""

__version__ = "0.1.0"
