"""Numerical laboratory for second-order estimates of degenerate complex Monge-Ampere and Hessian equations."""

__version__ = "0.1.0"
