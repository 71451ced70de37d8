"""Discontinuous-Galerkin block compression of grid Hamiltonians."""

__version__ = "0.1.0"
