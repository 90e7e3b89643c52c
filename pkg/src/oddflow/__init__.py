"""Pseudo-spectral solver and verification harness for 2D variable-density
incompressible flow with density-dependent odd (transverse) viscosity.

Submodules are imported on demand, e.g. ``from oddflow import grid``.
"""

__version__ = "0.1.0"
