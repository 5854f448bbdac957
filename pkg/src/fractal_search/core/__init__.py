"""
Core functionality for fractal-search.
"""
from fractal_search.core.lattice import FractalLattice, StageConfig, build_gasket, build_hypercubic
from fractal_search.core.walk import FlipFlopWalk, WalkState

__all__ = [
    "FractalLattice",
    "StageConfig",
    "build_gasket",
    "build_hypercubic",
    "FlipFlopWalk",
    "WalkState",
]
