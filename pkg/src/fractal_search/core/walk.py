"""
Flip-flop quantum walk: state vectors, shift, Grover coin and oracle.

Amplitudes are stored as a ``(layers, N*k)`` complex array with flat index
``vertex*k + slot``, so the coin acts on contiguous blocks of ``k``.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from fractal_search.core.lattice import FractalLattice

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-10


@dataclass
class WalkState:
    """Amplitudes on the link slots of a lattice, with an optional ancilla layer."""

    lattice: FractalLattice
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.ndim == 1:
            self.amplitudes = self.amplitudes[None, :]
        layers, length = self.amplitudes.shape
        if layers not in (1, 2):
            raise ValueError(f"ancilla_layers must be 1 or 2, got {layers}")
        if length != self.lattice.n_slots:
            raise ValueError(
                f"state length {length} does not match N*k = {self.lattice.n_slots}"
            )

    @property
    def ancilla_layers(self) -> int:
        return int(self.amplitudes.shape[0])

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def is_normalized(self, tol: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol

    def by_vertex(self) -> np.ndarray:
        """View shaped ``(layers, N, k)``."""
        return self.amplitudes.reshape(self.ancilla_layers, self.lattice.n_vertices, self.lattice.k)

    def copy(self) -> "WalkState":
        return WalkState(self.lattice, self.amplitudes.copy())


def uniform_state(lattice: FractalLattice, layers: int = 1) -> WalkState:
    """
    Unbiased superposition ``(N*k)^(-1/2)`` on every slot. With two layers the
    weight sits entirely on ancilla layer 1.
    """
    amplitudes = np.zeros((layers, lattice.n_slots), dtype=np.complex128)
    amplitudes[-1] = 1.0 / math.sqrt(lattice.n_slots)
    return WalkState(lattice, amplitudes)


def basis_state(lattice: FractalLattice, vertex: int, slot: int, layers: int = 1) -> WalkState:
    amplitudes = np.zeros((layers, lattice.n_slots), dtype=np.complex128)
    amplitudes[-1, lattice.check_vertex(vertex) * lattice.k + slot] = 1.0
    return WalkState(lattice, amplitudes)


class FlipFlopWalk:
    """
    In-place walk kernel bound to one lattice.

    ``shift`` gathers into a spare buffer and hands the old array back as the
    next spare, so repeated steps allocate nothing. Arrays passed to the
    kernel may be 1-D (one layer) or carry leading batch axes.
    """

    def __init__(self, lattice: FractalLattice):
        self.lattice = lattice
        self._partner = np.asarray(lattice.partner)
        self._k = lattice.k
        self._spare: Optional[np.ndarray] = None

    def _buffer_like(self, amplitudes: np.ndarray) -> np.ndarray:
        spare = self._spare
        if (
            spare is None
            or spare is amplitudes
            or spare.shape != amplitudes.shape
            or spare.dtype != amplitudes.dtype
        ):
            spare = np.empty_like(amplitudes)
        self._spare = None
        return spare

    def shift(self, amplitudes: np.ndarray) -> np.ndarray:
        """Move every slot amplitude to its partner slot; returns the new array."""
        out = self._buffer_like(amplitudes)
        # partner is an involution, so gathering by it equals scattering by it.
        np.take(amplitudes, self._partner, axis=-1, out=out, mode="clip")
        self._spare = amplitudes
        return out

    def coin(self, amplitudes: np.ndarray) -> np.ndarray:
        """Reflection about the mean of each vertex block, in place."""
        if not amplitudes.flags.c_contiguous:
            raise ValueError("coin needs a C-contiguous amplitude array")
        blocks = amplitudes.reshape(amplitudes.shape[:-1] + (-1, self._k))
        mean = blocks.sum(axis=-1, keepdims=True)
        mean *= 2.0 / self._k
        np.subtract(mean, blocks, out=blocks)
        return amplitudes

    def step(self, amplitudes: np.ndarray, steps: int = 1) -> np.ndarray:
        """``W = G S`` applied ``steps`` times; the input array becomes scratch."""
        for _ in range(steps):
            amplitudes = self.coin(self.shift(amplitudes))
        return amplitudes

    def oracle(self, amplitudes: np.ndarray, marked: int) -> np.ndarray:
        start = self.lattice.check_vertex(marked) * self._k
        amplitudes[..., start:start + self._k] *= -1.0
        return amplitudes

    def marked_probability(self, amplitudes: np.ndarray, marked: int) -> float:
        start = self.lattice.check_vertex(marked) * self._k
        block = amplitudes[..., start:start + self._k]
        return float((block.real ** 2 + block.imag ** 2).sum())


def apply_shift(state: WalkState) -> WalkState:
    kernel = FlipFlopWalk(state.lattice)
    return WalkState(state.lattice, kernel.shift(state.amplitudes.copy()))


def apply_coin(state: WalkState) -> WalkState:
    kernel = FlipFlopWalk(state.lattice)
    return WalkState(state.lattice, kernel.coin(state.amplitudes.copy()))


def apply_walk(state: WalkState, steps: int = 1) -> WalkState:
    kernel = FlipFlopWalk(state.lattice)
    return WalkState(state.lattice, kernel.step(state.amplitudes.copy(), steps))


def apply_oracle(state: WalkState, marked: int) -> WalkState:
    """Flip the sign of all amplitude at ``marked``, independently per layer."""
    kernel = FlipFlopWalk(state.lattice)
    return WalkState(state.lattice, kernel.oracle(state.amplitudes.copy(), marked))


def marked_probability(state: WalkState, marked: int) -> float:
    """Probability at ``marked`` summed over slots and ancilla layers."""
    return FlipFlopWalk(state.lattice).marked_probability(state.amplitudes, marked)


def probability_distribution(state: WalkState) -> np.ndarray:
    """Per-vertex probability, summed over slots and layers."""
    weights = state.by_vertex()
    return (weights.real ** 2 + weights.imag ** 2).sum(axis=(0, 2))
