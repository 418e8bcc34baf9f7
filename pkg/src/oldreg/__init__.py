"""Regularized Oldroyd-type viscoelastic flow: solver, energy monitors and maximal-function diagnostics."""

__version__ = "0.1.0"
