"""
fractal-search
Quantum walk spatial search on Sierpinski gasket lattices.
"""

__version__ = "1.0.0"
__license__ = "MIT"

from fractal_search.core.lattice import FractalLattice, StageConfig, build_gasket
from fractal_search.core.search import SearchParams, SearchRun, run_plain, run_tulsi
from fractal_search.core.walk import WalkState, uniform_state

__all__ = [
    "FractalLattice",
    "StageConfig",
    "build_gasket",
    "SearchParams",
    "SearchRun",
    "run_plain",
    "run_tulsi",
    "WalkState",
    "uniform_state",
]
