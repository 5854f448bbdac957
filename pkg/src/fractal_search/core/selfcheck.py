"""
Release-gate checks behind ``fractal-search validate``.

Each check returns a ``CheckResult``; the suite collects them into one
``ValidationReport`` per subject and never raises on a failed check.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from fractal_search.core.errors import SizeCapExceeded
from fractal_search.core.lattice import (
    CheckResult,
    FractalLattice,
    StageConfig,
    ValidationReport,
    build_gasket,
    center_vertex,
    validate,
)
from fractal_search.core.search import DEFAULT_T1, SearchParams, run_plain, run_tulsi
from fractal_search.core.spectral import (
    DEFAULT_DENSE_CAP,
    build_walk_matrix,
    hypercubic_spectrum_check,
    unitarity_error,
)
from fractal_search.core.walk import FlipFlopWalk, WalkState, uniform_state

logger = logging.getLogger(__name__)

INVOLUTION_TOLERANCE = 1e-14
FIXED_POINT_TOLERANCE = 1e-12
DRIFT_TOLERANCE = 1e-10
REDUCTION_TOLERANCE = 1e-12
TRAP_TOLERANCE = 1e-12
DENSE_TOLERANCE = 1e-12
DRIFT_STEPS = 10_000
SEARCH_BLOCKS = 100

HYPERCUBIC_CASES: Tuple[Tuple[int, int], ...] = ((2, 4), (2, 6), (3, 2))
DENSE_GASKET = StageConfig(embedding_dim=2, stage=2)

_SEED = 20240601


def random_state(lattice: FractalLattice, layers: int = 1, seed: int = _SEED) -> WalkState:
    """Normalized pseudo-random state; the fixed seed keeps checks reproducible."""
    rng = np.random.default_rng(seed)
    shape = (layers, lattice.n_slots)
    amplitudes = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    amplitudes /= np.linalg.norm(amplitudes)
    return WalkState(lattice, amplitudes)


def _measure(name: str, value: float, tolerance: float) -> CheckResult:
    passed = bool(value <= tolerance)
    return CheckResult(name, passed, f"{value:.3e} (tolerance {tolerance:.0e})")


def check_walk(
    lattice: FractalLattice, drift_steps: int = DRIFT_STEPS, search_blocks: int = SEARCH_BLOCKS
) -> List[CheckResult]:
    """
    Involutions, uniform fixed point, oracle/coin commutation, norm drift
    over ``drift_steps`` walk steps, and the per-vertex probabilities of a
    state after ``search_blocks`` oracle blocks summing to one.
    """
    kernel = FlipFlopWalk(lattice)
    marked = center_vertex(lattice)
    state = random_state(lattice).amplitudes[0]
    results = []

    twice = kernel.shift(kernel.shift(state.copy()).copy())
    results.append(_measure("shift_involution", float(np.abs(twice - state).max()), INVOLUTION_TOLERANCE))

    twice = kernel.coin(kernel.coin(state.copy()))
    results.append(_measure("coin_involution", float(np.abs(twice - state).max()), INVOLUTION_TOLERANCE))

    twice = kernel.oracle(kernel.oracle(state.copy(), marked), marked)
    results.append(_measure("oracle_involution", float(np.abs(twice - state).max()), INVOLUTION_TOLERANCE))

    coin_then_oracle = kernel.oracle(kernel.coin(state.copy()), marked)
    oracle_then_coin = kernel.coin(kernel.oracle(state.copy(), marked))
    results.append(_measure(
        "oracle_coin_commute",
        float(np.abs(coin_then_oracle - oracle_then_coin).max()),
        INVOLUTION_TOLERANCE,
    ))

    uniform = uniform_state(lattice).amplitudes[0]
    stepped = kernel.step(uniform.copy())
    results.append(_measure("uniform_fixed_point", float(np.abs(stepped - uniform).max()), FIXED_POINT_TOLERANCE))

    evolved = kernel.step(state.copy(), drift_steps)
    drift = abs(float(np.vdot(evolved, evolved).real) - 1.0)
    results.append(_measure("norm_drift", drift, DRIFT_TOLERANCE))

    searched = state.copy()
    for _ in range(search_blocks):
        kernel.oracle(searched, marked)
        searched = kernel.step(searched, DEFAULT_T1)
    total = sum(kernel.marked_probability(searched, v) for v in range(lattice.n_vertices))
    results.append(_measure("probability_sum", abs(total - 1.0), DRIFT_TOLERANCE))
    return results


def check_search(lattice: FractalLattice, horizon: int = 64, cos_delta: float = 0.5) -> List[CheckResult]:
    """Plain versus cos_delta=1 controlled series, and the trap invariant."""
    marked = center_vertex(lattice)
    plain = run_plain(lattice, SearchParams(marked=marked, horizon=horizon))
    reduced = run_tulsi(lattice, SearchParams(marked=marked, horizon=horizon, cos_delta=1.0))
    gap = float(np.abs(plain.probability_series - reduced.probability_series).max())

    trapped = run_tulsi(
        lattice, SearchParams(marked=marked, horizon=horizon, cos_delta=cos_delta), track_trap=True
    )
    return [
        _measure("delta_zero_reduction", gap, REDUCTION_TOLERANCE),
        _measure("trap_invariant", trapped.max_trap_leak, TRAP_TOLERANCE),
    ]


def check_dense_equivalence(lattice: FractalLattice, cap: int = DEFAULT_DENSE_CAP) -> List[CheckResult]:
    """Dense ``W`` against the kernel applied to every basis state at once."""
    matrix = build_walk_matrix(lattice, cap)
    basis = np.eye(lattice.n_slots, dtype=np.complex128)
    # Row i of the stepped identity is W applied to basis state i, i.e. column i of W.
    stepped = FlipFlopWalk(lattice).step(basis)
    return [
        _measure("dense_equivalence", float(np.abs(stepped.T - matrix).max()), DENSE_TOLERANCE),
        _measure("dense_unitarity", unitarity_error(matrix), DENSE_TOLERANCE),
    ]


def check_hypercubic(
    cases: Sequence[Tuple[int, int]] = HYPERCUBIC_CASES, cap: int = DEFAULT_DENSE_CAP
) -> List[CheckResult]:
    results = []
    for d, L in cases:
        name = f"hypercubic_spectrum_d{d}_L{L}"
        try:
            report = hypercubic_spectrum_check(d, L, cap=cap)
        except SizeCapExceeded as e:
            logger.warning(f"Skipping {name}: {e}")
            continue
        detail = f"max match distance {report.max_match_distance:.3e}"
        if not report.passed:
            detail += f", computed {report.worst_offender[0]} vs expected {report.worst_offender[1]}"
        results.append(CheckResult(name, report.passed, detail))
    return results


def _guarded(report: ValidationReport, label: str, check: Callable[[], List[CheckResult]]):
    try:
        report.checks.extend(check())
    except Exception as e:
        logger.error(f"{label} failed with {type(e).__name__}: {e}")
        report.checks.append(CheckResult(label, False, f"{type(e).__name__}: {e}"))


def run_selfcheck(
    lattice: Optional[FractalLattice] = None,
    stage: Optional[StageConfig] = None,
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> List[ValidationReport]:
    """
    Validate ``lattice`` (or the gasket built from ``stage``, default 2D S=4),
    then exercise the walk and search invariants on it, the dense oracle on
    the 2D S=2 gasket, and the hypercubic closed-form spectra.
    """
    if lattice is None:
        lattice = build_gasket(stage or StageConfig(embedding_dim=2, stage=4))

    structure = validate(lattice)
    reports = [structure]
    if not structure.passed:
        return reports

    dynamics = ValidationReport(subject=f"walk on {lattice.describe()}")
    _guarded(dynamics, "walk_invariants", lambda: check_walk(lattice))
    _guarded(dynamics, "search_invariants", lambda: check_search(lattice))
    reports.append(dynamics)

    dense_lattice = build_gasket(DENSE_GASKET)
    dense = ValidationReport(subject=f"dense oracle on {dense_lattice.describe()}")
    _guarded(dense, "dense_oracle", lambda: check_dense_equivalence(dense_lattice, dense_cap))
    reports.append(dense)

    spectra = ValidationReport(subject="hypercubic spectra")
    _guarded(spectra, "hypercubic_spectra", lambda: check_hypercubic(cap=dense_cap))
    reports.append(spectra)

    for report in reports[1:]:
        for failure in report.failures():
            logger.error(f"{report.subject}: {failure.name} failed: {failure.detail}")
    return reports
