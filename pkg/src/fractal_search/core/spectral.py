"""
Dense correctness oracle for small lattices.

The walk unitary is assembled directly from the slot tables, independently
of the fast kernel, and diagonalized with numpy.
"""
import logging
from dataclasses import dataclass
from itertools import product
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from fractal_search.core.errors import SizeCapExceeded
from fractal_search.core.lattice import FractalLattice, build_hypercubic
from fractal_search.core.walk import uniform_state

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 4096
MODULUS_TOLERANCE = 1e-9
MATCH_TOLERANCE = 1e-8


def build_walk_matrix(lattice: FractalLattice, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Dense ``W = G S`` of size ``(N*k)^2``; column ``i`` is ``W`` applied to basis state ``i``."""
    n = lattice.n_slots
    if n > cap:
        raise SizeCapExceeded(f"Walk matrix of size {n} exceeds dense cap {cap}")
    k = lattice.k

    shift = np.zeros((n, n), dtype=np.complex128)
    shift[np.asarray(lattice.partner), np.arange(n)] = 1.0

    block = np.full((k, k), 2.0 / k) - np.eye(k)
    coin = np.kron(np.eye(lattice.n_vertices), block).astype(np.complex128)
    return coin @ shift


def unitarity_error(matrix: np.ndarray) -> float:
    return float(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])).max())


def sort_spectrum(eigenvalues: np.ndarray) -> np.ndarray:
    """Order by (phase, modulus) for stable export."""
    eigenvalues = np.asarray(eigenvalues)
    return eigenvalues[np.lexsort((np.abs(eigenvalues), np.angle(eigenvalues)))]


@dataclass
class SpectrumReport:
    """Computed eigenvalues of a walk operator, optionally against a closed form."""

    descriptor: str
    eigenvalues: np.ndarray
    max_modulus_deviation: float
    theory: Optional[np.ndarray] = None
    tolerance: float = MATCH_TOLERANCE
    matched: Optional[bool] = None
    max_match_distance: Optional[float] = None
    worst_offender: Optional[Tuple[complex, complex]] = None
    conjugate_closed: Optional[bool] = None
    uniform_residual: Optional[float] = None

    @property
    def unit_modulus(self) -> bool:
        return self.max_modulus_deviation <= MODULUS_TOLERANCE

    @property
    def passed(self) -> bool:
        checks = [self.unit_modulus]
        if self.matched is not None:
            checks.append(self.matched)
        if self.conjugate_closed is not None:
            checks.append(self.conjugate_closed)
        return all(checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "descriptor": self.descriptor,
            "size": int(self.eigenvalues.size),
            "max_modulus_deviation": self.max_modulus_deviation,
            "tolerance": self.tolerance,
            "matched": self.matched,
            "max_match_distance": self.max_match_distance,
            "worst_offender": (
                [str(self.worst_offender[0]), str(self.worst_offender[1])]
                if self.worst_offender else None
            ),
            "conjugate_closed": self.conjugate_closed,
            "uniform_residual": self.uniform_residual,
        }


def match_multisets(
    computed: np.ndarray, expected: np.ndarray
) -> Tuple[float, Tuple[complex, complex]]:
    """
    Pair two equally sized multisets of complex numbers with minimal total
    distance; returns the largest paired distance and that pair.
    """
    computed = np.asarray(computed)
    expected = np.asarray(expected)
    if computed.size != expected.size:
        raise ValueError(f"multiset sizes differ: {computed.size} vs {expected.size}")
    cost = np.abs(computed[:, None] - expected[None, :])
    rows, cols = linear_sum_assignment(cost)
    distances = cost[rows, cols]
    worst = int(np.argmax(distances))
    return float(distances[worst]), (complex(computed[rows[worst]]), complex(expected[cols[worst]]))


def hypercubic_theory(d: int, L: int) -> np.ndarray:
    """
    Closed-form walk spectrum on the periodic ``L^d`` lattice: for every
    momentum, ``d-1`` copies each of +1 and -1 plus ``exp(+-i w)`` with
    ``cos w = (1/d) sum cos k_i``.
    """
    values = []
    for momentum in product(range(L), repeat=d):
        cos_w = float(np.mean(np.cos(2.0 * np.pi * np.asarray(momentum) / L)))
        w = float(np.arccos(np.clip(cos_w, -1.0, 1.0)))
        values.extend([1.0] * (d - 1) + [-1.0] * (d - 1))
        values.extend([np.exp(1j * w), np.exp(-1j * w)])
    return np.asarray(values, dtype=np.complex128)


def hypercubic_spectrum_check(
    d: int, L: int, tolerance: float = MATCH_TOLERANCE, cap: int = DEFAULT_DENSE_CAP
) -> SpectrumReport:
    lattice = build_hypercubic(d, L)
    eigenvalues = np.linalg.eigvals(build_walk_matrix(lattice, cap))
    theory = hypercubic_theory(d, L)
    distance, worst = match_multisets(eigenvalues, theory)
    report = SpectrumReport(
        descriptor=lattice.describe(),
        eigenvalues=sort_spectrum(eigenvalues),
        max_modulus_deviation=float(np.abs(np.abs(eigenvalues) - 1.0).max()),
        theory=sort_spectrum(theory),
        tolerance=tolerance,
        matched=distance <= tolerance,
        max_match_distance=distance,
        worst_offender=worst,
    )
    if report.matched:
        logger.info(f"{report.descriptor}: spectrum matches closed form (max distance {distance:.2e})")
    else:
        logger.error(
            f"{report.descriptor}: spectrum mismatch, computed {worst[0]} vs expected {worst[1]}"
        )
    return report


def gasket_spectrum(lattice: FractalLattice, cap: int = DEFAULT_DENSE_CAP) -> SpectrumReport:
    """Eigenvalues of the walk on ``lattice``; no closed form exists, so only structural checks."""
    matrix = build_walk_matrix(lattice, cap)
    eigenvalues = np.linalg.eigvals(matrix)
    conjugate_distance, _ = match_multisets(eigenvalues, eigenvalues.conj())
    uniform = uniform_state(lattice).amplitudes[0]
    report = SpectrumReport(
        descriptor=lattice.describe(),
        eigenvalues=sort_spectrum(eigenvalues),
        max_modulus_deviation=float(np.abs(np.abs(eigenvalues) - 1.0).max()),
        conjugate_closed=conjugate_distance <= MATCH_TOLERANCE,
        uniform_residual=float(np.abs(matrix @ uniform - uniform).max()),
    )
    logger.info(
        f"{report.descriptor}: {eigenvalues.size} eigenvalues, "
        f"max ||l|-1| = {report.max_modulus_deviation:.2e}"
    )
    return report
