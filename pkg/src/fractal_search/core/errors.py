"""
Exception types raised by fractal-search.
"""


class FractalSearchError(Exception):
    """Base class for all fractal-search errors."""


class LatticeConsistencyError(FractalSearchError, RuntimeError):
    """A lattice under construction broke one of its structural invariants."""


class StageOverflowError(FractalSearchError, OverflowError):
    """A stage is too large to count or to allocate."""


class SizeCapExceeded(FractalSearchError, ValueError):
    """A dense operator would exceed the configured size cap."""


class InvalidVertexError(FractalSearchError, IndexError):
    """A vertex id does not belong to the lattice."""


class FitError(FractalSearchError, ValueError):
    """Input data cannot be fitted."""
