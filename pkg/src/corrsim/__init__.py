"""Simulation of simultaneous-message protocols over imperfect shared randomness."""

from ._rng import RNG_NAME
from .sources import BipartiteSource, load_source, make_standard

__version__ = "0.1.0"

__all__ = ["RNG_NAME", "BipartiteSource", "load_source", "make_standard", "__version__"]
