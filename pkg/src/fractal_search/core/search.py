"""
Spatial search drivers: plain ``[W^t1 R]^t2`` iteration and the
ancilla-controlled variant that traps amplitude at the marked vertex.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from fractal_search.core.lattice import FractalLattice
from fractal_search.core.walk import FlipFlopWalk, WalkState, uniform_state

logger = logging.getLogger(__name__)

DEFAULT_T1 = 2
PLAIN_HORIZON_FACTOR = 3.0
TULSI_HORIZON_FACTOR = 6.0
_PROGRESS_EVERY = 1000


def default_horizon_plain(n_vertices: int, factor: float = PLAIN_HORIZON_FACTOR) -> int:
    return max(1, math.ceil(factor * n_vertices ** 0.75))


def default_horizon_tulsi(
    n_vertices: int, cos_delta: float, factor: float = TULSI_HORIZON_FACTOR
) -> int:
    if cos_delta <= 0:
        raise ValueError("cos_delta must be positive for a controlled search")
    return max(1, math.ceil(factor * math.sqrt(n_vertices) / cos_delta))


@dataclass(frozen=True)
class SearchParams:
    """Walk steps per oracle call, marked vertex, ancilla angle and horizon."""

    marked: int
    horizon: int
    t1: int = DEFAULT_T1
    cos_delta: float = 0.0

    def __post_init__(self):
        if self.t1 < 1:
            raise ValueError(f"t1 must be >= 1, got {self.t1}")
        if not 0.0 <= self.cos_delta <= 1.0:
            raise ValueError(f"cos_delta must lie in [0, 1], got {self.cos_delta}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")

    @classmethod
    def for_lattice(
        cls,
        lattice: FractalLattice,
        marked: int,
        t1: int = DEFAULT_T1,
        cos_delta: float = 0.0,
        horizon: Optional[int] = None,
        horizon_factor: Optional[float] = None,
    ) -> "SearchParams":
        """Fill in the default horizon for ``lattice`` when none is given."""
        lattice.check_vertex(marked)
        if horizon is None:
            n = lattice.n_vertices
            if cos_delta > 0:
                horizon = default_horizon_tulsi(n, cos_delta, horizon_factor or TULSI_HORIZON_FACTOR)
            else:
                horizon = default_horizon_plain(n, horizon_factor or PLAIN_HORIZON_FACTOR)
        return cls(marked=marked, horizon=horizon, t1=t1, cos_delta=cos_delta)

    @property
    def sin_delta(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.cos_delta ** 2))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "marked": self.marked,
            "horizon": self.horizon,
            "t1": self.t1,
            "cos_delta": self.cos_delta,
        }


@dataclass(frozen=True)
class PeakInfo:
    """
    First-period peak of a probability series, used for ``Q`` and ``P``,
    with the global maximum over the horizon kept for comparison.
    """

    Q: int
    P: float
    global_Q: int
    global_P: float
    no_peak: bool = False


RISE_FRACTION = 0.4
FALL_FRACTION = 0.2


def detect_peak(
    series, rise_fraction: float = RISE_FRACTION, fall_fraction: float = FALL_FRACTION
) -> PeakInfo:
    """
    Find the first excursion of the series that climbs to ``rise_fraction``
    of the global maximum and return its highest point. The excursion ends
    once the series falls below ``fall_fraction`` of the best value reached
    within it, so later revivals never replace the first-period peak.

    A series that never rises above its initial value, or whose first
    excursion is still climbing at the end of the horizon, is flagged as
    having no peak.
    """
    values = np.asarray(series, dtype=np.float64)
    if values.size == 0:
        raise ValueError("probability series is empty")
    if values.size == 1:
        p = float(values[0])
        return PeakInfo(Q=0, P=p, global_Q=0, global_P=p, no_peak=True)

    g = 1 + int(np.argmax(values[1:]))
    global_p = float(values[g])
    if global_p <= values[0]:
        return PeakInfo(Q=g, P=global_p, global_Q=g, global_P=global_p, no_peak=True)

    start = 1 + int(np.argmax(values[1:] >= rise_fraction * global_p))
    q, best = start, values[start]
    for i in range(start + 1, values.size):
        if values[i] > best:
            q, best = i, values[i]
        elif values[i] < fall_fraction * best:
            break
    return PeakInfo(
        Q=q,
        P=float(best),
        global_Q=g,
        global_P=global_p,
        no_peak=q == values.size - 1,
    )


@dataclass(frozen=True)
class TulsiPrediction:
    """Two-dimensional-subspace prediction for the controlled search."""

    B: float
    cos_delta: float
    B_delta: float
    P_delta: float
    Q_delta: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "B": self.B,
            "cos_delta": self.cos_delta,
            "B_delta": self.B_delta,
            "P_delta": self.P_delta,
            "Q_delta": self.Q_delta,
        }


def predicted_tulsi(B: float, cos_delta: float, n_vertices: int) -> TulsiPrediction:
    """``B_d^2 = 1 + (B^2-1) cos^2 d``, ``P_d = 1/B_d^2``, ``Q_d = pi B_d sqrt(N) / (4 cos d)``."""
    if B < 1.0:
        raise ValueError(f"B must be >= 1, got {B}")
    if cos_delta == 0:
        raise ValueError("cos_delta must be non-zero")
    b_delta_sq = 1.0 + (B * B - 1.0) * cos_delta * cos_delta
    b_delta = math.sqrt(b_delta_sq)
    return TulsiPrediction(
        B=B,
        cos_delta=cos_delta,
        B_delta=b_delta,
        P_delta=1.0 / b_delta_sq,
        Q_delta=math.pi * b_delta * math.sqrt(n_vertices) / (4.0 * cos_delta),
    )


def predicted_complexity(B: float, n_vertices: int) -> float:
    """Minimal ``Q_d / sqrt(P_d)`` at the optimal angle, ``pi sqrt(N) B / 2``."""
    return math.pi * math.sqrt(n_vertices) * B / 2.0


def calibrate_cos_delta(p0: float) -> float:
    """
    Optimal ancilla angle ``(B^2-1)^(-1/2)`` with ``B^2 = 1/P0``, i.e.
    ``sqrt(P0/(1-P0))``. Peaks of 0.5 or more need no control and give 1.
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"P0 must lie strictly between 0 and 1, got {p0}")
    cos_delta = math.sqrt(p0 / (1.0 - p0))
    if cos_delta > 1.0:
        logger.warning(f"P0={p0:.4f} >= 0.5, clamping cos_delta to 1")
        return 1.0
    return cos_delta


@dataclass
class SearchRun:
    """Marked-vertex probability after every oracle block, with its peak."""

    params: SearchParams
    n_vertices: int
    probability_series: np.ndarray
    peak: PeakInfo
    ancilla: bool = False
    max_trap_leak: Optional[float] = None
    prediction: Optional[TulsiPrediction] = None
    peak_state: Optional[WalkState] = field(default=None, repr=False)

    @property
    def Q(self) -> int:
        return self.peak.Q

    @property
    def P(self) -> float:
        return self.peak.P

    @property
    def no_peak(self) -> bool:
        return self.peak.no_peak

    @property
    def complexity(self) -> float:
        """Effective oracle calls ``Q / sqrt(P)``."""
        return self.Q / math.sqrt(self.P) if self.P > 0 else math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "N": self.n_vertices,
            "ancilla": self.ancilla,
            "Q": self.Q,
            "P": self.P,
            "Q_over_sqrtP": self.complexity,
            "no_peak": self.no_peak,
            "global_Q": self.peak.global_Q,
            "global_P": self.peak.global_P,
            "max_trap_leak": self.max_trap_leak,
            "prediction": self.prediction.to_dict() if self.prediction else None,
        }


def _finish(
    lattice: FractalLattice,
    params: SearchParams,
    series: List[float],
    ancilla: bool,
    replay: Optional[Callable[[int], np.ndarray]] = None,
    **extra: Any,
) -> SearchRun:
    peak = detect_peak(series)
    run = SearchRun(
        params=params,
        n_vertices=lattice.n_vertices,
        probability_series=np.asarray(series),
        peak=peak,
        ancilla=ancilla,
        peak_state=WalkState(lattice, replay(peak.Q)) if replay is not None else None,
        **extra,
    )
    kind = "controlled" if ancilla else "plain"
    if run.no_peak:
        logger.warning(
            f"No probability peak within {params.horizon} blocks "
            f"({kind}, N={lattice.n_vertices}); best P={run.P:.6g} at Q={run.Q}"
        )
    else:
        logger.info(
            f"{kind.capitalize()} search on N={lattice.n_vertices}: Q={run.Q}, P={run.P:.6g} "
            f"(global max P={peak.global_P:.6g} at {peak.global_Q})"
        )
    return run


def _plain_blocks(kernel: FlipFlopWalk, params: SearchParams) -> Iterator[np.ndarray]:
    """Yield the amplitudes before the first block and after every block."""
    amplitudes = uniform_state(kernel.lattice).amplitudes[0]
    yield amplitudes
    for _ in range(params.horizon):
        kernel.oracle(amplitudes, params.marked)
        amplitudes = kernel.step(amplitudes, params.t1)
        yield amplitudes


def _state_at(blocks: Iterator[Any], block: int) -> np.ndarray:
    """Copy of the layers yielded for ``block``."""
    return np.atleast_2d(np.array(next(itertools.islice(blocks, block, None)), copy=True))


def run_plain(
    lattice: FractalLattice, params: SearchParams, capture_peak_state: bool = False
) -> SearchRun:
    """
    Start from the uniform state and apply ``horizon`` blocks of oracle then
    ``t1`` walk steps, recording the marked-vertex probability after each.

    With ``capture_peak_state`` the walk is replayed up to the detected peak
    and the state there is attached to the run.
    """
    kernel = FlipFlopWalk(lattice)
    series = []
    for block, amplitudes in enumerate(_plain_blocks(kernel, params)):
        series.append(kernel.marked_probability(amplitudes, params.marked))
        if block and block % _PROGRESS_EVERY == 0:
            logger.debug(f"block {block}/{params.horizon}: P={series[-1]:.6g}")

    replay = None
    if capture_peak_state:
        def replay(q: int) -> np.ndarray:
            return _state_at(_plain_blocks(FlipFlopWalk(lattice), params), q)

    return _finish(lattice, params, series, ancilla=False, replay=replay)


def _rotate(trap: np.ndarray, search: np.ndarray, c: float, s: float):
    """Ancilla rotation ``[[c, s], [-s, c]]`` applied to (layer 0, layer 1)."""
    new_trap = c * trap + s * search
    search *= c
    search -= s * trap
    trap[...] = new_trap


def _tulsi_blocks(kernel: FlipFlopWalk, params: SearchParams) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Yield both ancilla layers before the first block and after every block."""
    c, s = params.cos_delta, params.sin_delta
    initial = uniform_state(kernel.lattice, layers=2).amplitudes
    trap, search = initial[0].copy(), initial[1].copy()
    yield trap, search
    for _ in range(params.horizon):
        _rotate(trap, search, c, s)
        kernel.oracle(search, params.marked)
        _rotate(trap, search, c, -s)
        search = kernel.step(search, params.t1)
        trap *= -1.0
        yield trap, search


def run_tulsi(
    lattice: FractalLattice,
    params: SearchParams,
    capture_peak_state: bool = False,
    track_trap: bool = False,
    B: Optional[float] = None,
) -> SearchRun:
    """
    Ancilla-controlled search from ``|1> (x) |s>``.

    Each block applies ``X_d``, the oracle on layer 1, ``X_d^dagger``, ``t1``
    walk steps on layer 1 and the sign flip of layer 0. With ``track_trap``
    the run records the largest layer-0 amplitude away from the marked vertex.
    When ``B`` is given the two-dimensional-subspace prediction is attached.
    """
    if params.cos_delta <= 0:
        raise ValueError("controlled search needs cos_delta > 0")
    k = lattice.k
    start = lattice.check_vertex(params.marked) * k
    kernel = FlipFlopWalk(lattice)

    series = []
    max_leak = 0.0
    for block, (trap, search) in enumerate(_tulsi_blocks(kernel, params)):
        series.append(
            kernel.marked_probability(trap, params.marked)
            + kernel.marked_probability(search, params.marked)
        )
        if track_trap:
            off_marked = np.abs(trap)
            off_marked[start:start + k] = 0.0
            max_leak = max(max_leak, float(off_marked.max()))
        if block and block % _PROGRESS_EVERY == 0:
            logger.debug(f"block {block}/{params.horizon}: P={series[-1]:.6g}")

    replay = None
    if capture_peak_state:
        def replay(q: int) -> np.ndarray:
            return _state_at(_tulsi_blocks(FlipFlopWalk(lattice), params), q)

    prediction = predicted_tulsi(B, params.cos_delta, lattice.n_vertices) if B is not None else None
    return _finish(
        lattice, params, series, ancilla=True, replay=replay,
        max_trap_leak=max_leak if track_trap else None,
        prediction=prediction,
    )
