"""Fractional seminorms, Whitney chains, capacities and inequality checks on gridded domains."""

from .functional import FracParams, seminorm_full, seminorm_tau
from .geometry import GALLERY, Box, DyadicCube, make_domain
from .grid import GridFunction, Lattice

__version__ = "0.1.0"

__all__ = [
    "Box",
    "DyadicCube",
    "FracParams",
    "GALLERY",
    "GridFunction",
    "Lattice",
    "make_domain",
    "seminorm_full",
    "seminorm_tau",
    "__version__",
]
