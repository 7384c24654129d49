"""Computational dynamics on the Heisenberg nilmanifold and its torus base."""

__version__ = "0.1.0"

from . import autos, cocycles, conjugacy, fibered, graphtransform, heis, periodic, shadowing, torus  # noqa: F401
