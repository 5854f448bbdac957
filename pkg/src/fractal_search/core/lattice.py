"""
Sierpinski gasket and periodic hypercubic lattices.

A lattice is stored as a flat slot table. The link slots of vertex ``v`` are
the flat indices ``v*k .. v*k + k - 1``, ordered by ascending direction label,
and ``partner[i]`` is the flat index the amplitude in slot ``i`` moves to
under the flip-flop shift.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fractal_search.core.errors import (
    InvalidVertexError,
    LatticeConsistencyError,
    StageOverflowError,
)

logger = logging.getLogger(__name__)

_INT64_MAX = int(np.iinfo(np.int64).max)


class LatticeKind(str, Enum):
    """Lattice families the simulator can build."""
    GASKET = "gasket"
    HYPERCUBIC = "hypercubic"


@dataclass(frozen=True)
class StageConfig:
    """Embedding dimension and recursion stage of a gasket."""

    embedding_dim: int
    stage: int

    def __post_init__(self):
        if self.embedding_dim not in (2, 3):
            raise ValueError(f"embedding_dim must be 2 or 3, got {self.embedding_dim}")
        if self.stage < 1:
            raise ValueError(f"stage must be >= 1, got {self.stage}")

    @property
    def linear_extent(self) -> int:
        return 1 << self.stage


@dataclass(frozen=True)
class DirectionTable:
    """Integer displacement vectors and the involution pairing opposite labels."""

    directions: Tuple[Tuple[int, ...], ...]
    opposite: Tuple[int, ...]

    def __post_init__(self):
        if len(self.directions) != len(self.opposite):
            raise ValueError("directions and opposite must have the same length")
        for i, j in enumerate(self.opposite):
            if self.opposite[j] != i:
                raise ValueError(f"opposite is not an involution at label {i}")
            if any(a != -b for a, b in zip(self.directions[i], self.directions[j])):
                raise ValueError(f"direction {j} is not the negative of direction {i}")

    def __len__(self) -> int:
        return len(self.directions)

    @property
    def dim(self) -> int:
        return len(self.directions[0])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.directions, dtype=np.int64)

    def label_of(self, displacement: Sequence[int]) -> int:
        """Label whose displacement equals ``displacement`` exactly."""
        key = tuple(int(c) for c in displacement)
        for label, vector in enumerate(self.directions):
            if vector == key:
                return label
        raise KeyError(f"No direction with displacement {key}")

    def label_along(self, vector: Sequence[int]) -> int:
        """Label whose displacement is a positive multiple of ``vector``."""
        reduced = _reduce(vector)
        for label, direction in enumerate(self.directions):
            if _reduce(direction) == reduced:
                return label
        raise KeyError(f"No direction along {tuple(vector)}")


def _reduce(vector: Sequence[int]) -> Tuple[int, ...]:
    g = 0
    for c in vector:
        g = math.gcd(g, int(c))
    if g == 0:
        raise ValueError("zero vector has no direction")
    return tuple(int(c) // g for c in vector)


# Horizontal steps are +-2 so every gasket vertex sits on an integer grid.
GASKET_2D_DIRECTIONS = DirectionTable(
    directions=((2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)),
    opposite=(3, 4, 5, 0, 1, 2),
)

_FCC_HALF = ((1, 1, 0), (1, 0, 1), (0, 1, 1), (1, -1, 0), (1, 0, -1), (0, 1, -1))

GASKET_3D_DIRECTIONS = DirectionTable(
    directions=_FCC_HALF + tuple(tuple(-c for c in v) for v in _FCC_HALF),
    opposite=tuple((i + 6) % 12 for i in range(12)),
)


def hypercubic_directions(d: int) -> DirectionTable:
    """Axis directions ``+e_0 .. +e_{d-1}`` followed by ``-e_0 .. -e_{d-1}``."""
    plus = tuple(tuple(1 if j == i else 0 for j in range(d)) for i in range(d))
    minus = tuple(tuple(-c for c in v) for v in plus)
    return DirectionTable(
        directions=plus + minus,
        opposite=tuple((i + d) % (2 * d) for i in range(2 * d)),
    )


def _unit_simplex(embedding_dim: int) -> np.ndarray:
    if embedding_dim == 2:
        return np.array([(0, 0), (2, 0), (1, 1)], dtype=np.int64)
    return np.array([(0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)], dtype=np.int64)


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FractalLattice:
    """Immutable vertex and slot tables of a degree-regular lattice."""

    kind: LatticeKind
    embedding_dim: int
    extent: int
    directions: DirectionTable
    coords: np.ndarray
    slot_dir: np.ndarray
    partner: np.ndarray
    is_wrap: np.ndarray
    corners: Tuple[int, ...] = ()
    stage: Optional[int] = None

    @property
    def n_vertices(self) -> int:
        return int(self.coords.shape[0])

    @property
    def k(self) -> int:
        return int(self.slot_dir.shape[1])

    @property
    def n_slots(self) -> int:
        return self.n_vertices * self.k

    @property
    def linear_extent(self) -> int:
        return self.extent

    def check_vertex(self, vertex: int) -> int:
        if not 0 <= int(vertex) < self.n_vertices:
            raise InvalidVertexError(
                f"Vertex {vertex} outside 0..{self.n_vertices - 1}"
            )
        return int(vertex)

    def partner_of(self, vertex: int, slot: int) -> Tuple[int, int]:
        flat = int(self.partner[self.check_vertex(vertex) * self.k + slot])
        return divmod(flat, self.k)

    def slot_of(self, vertex: int, label: int) -> int:
        """Slot index carrying direction ``label`` at ``vertex``."""
        row = self.slot_dir[self.check_vertex(vertex)]
        hits = np.flatnonzero(row == label)
        if hits.size == 0:
            raise KeyError(f"Vertex {vertex} has no link with direction {label}")
        return int(hits[0])

    def vertex_at(self, coord: Sequence[int]) -> int:
        hits = np.flatnonzero((self.coords == np.asarray(coord)).all(axis=1))
        if hits.size == 0:
            raise InvalidVertexError(f"No vertex at {tuple(coord)}")
        return int(hits[0])

    def describe(self) -> str:
        if self.kind == LatticeKind.GASKET:
            return (
                f"gasket d_E={self.embedding_dim} S={self.stage} "
                f"N={self.n_vertices} k={self.k}"
            )
        return (
            f"hypercubic d={self.embedding_dim} L={self.extent} "
            f"N={self.n_vertices} k={self.k}"
        )


def _simplex_offsets(base: np.ndarray, stage: int) -> np.ndarray:
    """Origins of the unit simplices in recursion order (corner order, depth first)."""
    offsets = np.zeros((1, base.shape[1]), dtype=np.int64)
    for s in range(1, stage + 1):
        half = base * (1 << (s - 1))
        offsets = np.concatenate([corner + offsets for corner in half])
    return offsets


def build_gasket(cfg: StageConfig) -> FractalLattice:
    """
    Build the stage-``S`` Sierpinski gasket with corner wraparound links.

    Vertex ids follow first-encounter order of a depth-first subdivision that
    visits sub-simplices in corner order, so the numbering is reproducible.

    Raises:
        LatticeConsistencyError: a vertex ends up with a repeated direction
            label or a degree other than ``2*d_E``.
    """
    d_e, stage = cfg.embedding_dim, cfg.stage
    table = GASKET_2D_DIRECTIONS if d_e == 2 else GASKET_3D_DIRECTIONS
    k = 2 * d_e
    base = _unit_simplex(d_e)

    offsets = _simplex_offsets(base, stage)
    points = (offsets[:, None, :] + base[None, :, :]).reshape(-1, d_e)

    # Hash integer coordinates to dedupe, then renumber by first encounter.
    radix = (1 << (stage + 1)) + 1
    keys = np.zeros(points.shape[0], dtype=np.int64)
    for axis in range(d_e):
        keys = keys * radix + points[:, axis]
    unique_keys, first_seen, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first_seen, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    simplex_vertices = rank[inverse.reshape(-1)].reshape(-1, d_e + 1)
    coords = points[first_seen[order]]

    src_parts: List[np.ndarray] = []
    dir_parts: List[np.ndarray] = []
    wrap_parts: List[np.ndarray] = []
    for i, j in combinations(range(d_e + 1), 2):
        label = table.label_of(base[j] - base[i])
        fwd, bwd = simplex_vertices[:, i], simplex_vertices[:, j]
        src_parts.append(np.stack([fwd, bwd], axis=1).reshape(-1))
        labels = np.empty(2 * fwd.size, dtype=np.int64)
        labels[0::2] = label
        labels[1::2] = table.opposite[label]
        dir_parts.append(labels)
        wrap_parts.append(np.zeros(2 * fwd.size, dtype=bool))

    corner_coords = base * (1 << stage)
    corner_keys = np.zeros(d_e + 1, dtype=np.int64)
    for axis in range(d_e):
        corner_keys = corner_keys * radix + corner_coords[:, axis]
    corners = tuple(int(rank[i]) for i in np.searchsorted(unique_keys, corner_keys))

    for p, q in combinations(range(d_e + 1), 2):
        toward_q = table.label_along(corner_coords[q] - corner_coords[p])
        toward_p = table.label_along(corner_coords[p] - corner_coords[q])
        src_parts.append(np.array([corners[p], corners[q]], dtype=np.int64))
        dir_parts.append(
            np.array([table.opposite[toward_q], table.opposite[toward_p]], dtype=np.int64)
        )
        wrap_parts.append(np.ones(2, dtype=bool))

    lattice = _assemble(
        kind=LatticeKind.GASKET,
        embedding_dim=d_e,
        extent=cfg.linear_extent,
        table=table,
        coords=coords,
        k=k,
        src=np.concatenate(src_parts),
        labels=np.concatenate(dir_parts),
        wrap=np.concatenate(wrap_parts),
        corners=corners,
        stage=stage,
    )
    logger.info(
        f"Built {lattice.describe()} "
        f"({int(lattice.is_wrap.sum()) // 2} wraparound links)"
    )
    return lattice


def _assemble(
    kind: LatticeKind,
    embedding_dim: int,
    extent: int,
    table: DirectionTable,
    coords: np.ndarray,
    k: int,
    src: np.ndarray,
    labels: np.ndarray,
    wrap: np.ndarray,
    corners: Tuple[int, ...],
    stage: Optional[int],
) -> FractalLattice:
    """
    Turn a half-edge list into slot tables.

    Half-edges come in twin pairs ``(2i, 2i+1)``; sorting by ``(vertex, label)``
    puts every half-edge at its flat slot index.
    """
    n_vertices = coords.shape[0]
    degree = np.bincount(src, minlength=n_vertices)
    bad = np.flatnonzero(degree != k)
    if bad.size:
        v = int(bad[0])
        raise LatticeConsistencyError(f"Vertex {v} has degree {int(degree[v])}, expected {k}")

    order = np.lexsort((labels, src))
    sorted_src, sorted_labels = src[order], labels[order]
    repeated = np.flatnonzero(
        (sorted_src[1:] == sorted_src[:-1]) & (sorted_labels[1:] == sorted_labels[:-1])
    )
    if repeated.size:
        v = int(sorted_src[repeated[0]])
        raise LatticeConsistencyError(
            f"Vertex {v} has two links with direction {int(sorted_labels[repeated[0]])}"
        )

    flat_of = np.empty_like(order)
    flat_of[order] = np.arange(order.size)
    partner = np.empty_like(flat_of)
    partner[flat_of] = flat_of[np.arange(order.size) ^ 1]

    return FractalLattice(
        kind=kind,
        embedding_dim=embedding_dim,
        extent=extent,
        directions=table,
        coords=_freeze(np.ascontiguousarray(coords, dtype=np.int64)),
        slot_dir=_freeze(sorted_labels.reshape(n_vertices, k)),
        partner=_freeze(partner),
        is_wrap=_freeze(wrap[order]),
        corners=corners,
        stage=stage,
    )


def vertex_count_closed_form(cfg: StageConfig) -> int:
    """Number of gasket vertices, ``(d_E+1)((d_E+1)^S + 1)/2``."""
    q = cfg.embedding_dim + 1
    n = q * (q ** cfg.stage + 1) // 2
    if n > _INT64_MAX:
        raise StageOverflowError(
            f"Vertex count for d_E={cfg.embedding_dim}, S={cfg.stage} exceeds 64-bit range"
        )
    return n


def hausdorff_dimension(d_e: int) -> float:
    if d_e < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {d_e}")
    return math.log2(d_e + 1)


def spectral_dimension(d_e: int) -> float:
    if d_e < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {d_e}")
    return 2.0 * math.log(d_e + 1) / math.log(d_e + 3)


def lower_bounds(n_vertices: int, dimension: float) -> Dict[str, float]:
    """
    Reported lower bounds on oracle calls: walk travel ``d*N^(1/d)`` and
    unstructured search ``pi*sqrt(N)/4``.
    """
    travel = dimension * n_vertices ** (1.0 / dimension)
    grover = math.pi * math.sqrt(n_vertices) / 4.0
    return {"travel": travel, "grover": grover, "max": max(travel, grover)}


def center_vertex(lattice: FractalLattice) -> int:
    """
    Vertex nearest the centroid of the corners (of all vertices when the
    lattice has no corners). Ties go to the smallest id.
    """
    anchors = lattice.coords[list(lattice.corners)] if lattice.corners else lattice.coords
    # Scaling by the anchor count keeps the distance comparison in integers.
    scaled = lattice.coords * anchors.shape[0] - anchors.sum(axis=0)
    return int(np.argmin((scaled * scaled).sum(axis=1)))


def corner_vertex(lattice: FractalLattice) -> int:
    return lattice.corners[0] if lattice.corners else 0


@dataclass
class VertexCensus:
    """Populations of distinct direction-label sets."""

    internal: Dict[Tuple[int, ...], int] = field(default_factory=dict)
    corners: Dict[Tuple[int, ...], int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.internal.values()) + sum(self.corners.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "internal": [{"directions": list(k), "count": v} for k, v in self.internal.items()],
            "corners": [{"directions": list(k), "count": v} for k, v in self.corners.items()],
        }


def _census(rows: np.ndarray) -> Dict[Tuple[int, ...], int]:
    if rows.shape[0] == 0:
        return {}
    types, counts = np.unique(rows, axis=0, return_counts=True)
    return {tuple(int(x) for x in t): int(c) for t, c in zip(types, counts)}


def classify_vertices(lattice: FractalLattice) -> VertexCensus:
    is_corner = np.zeros(lattice.n_vertices, dtype=bool)
    is_corner[list(lattice.corners)] = True
    return VertexCensus(
        internal=_census(lattice.slot_dir[~is_corner]),
        corners=_census(lattice.slot_dir[is_corner]),
    )


def build_hypercubic(d: int, L: int) -> FractalLattice:
    """Periodic ``L^d`` torus with ``k = 2d`` axis links per vertex."""
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if L < 2 or L % 2:
        raise ValueError(f"L must be an even integer >= 2, got {L}")

    table = hypercubic_directions(d)
    k = 2 * d
    shape = (L,) * d
    coords = np.stack(np.unravel_index(np.arange(L ** d), shape), axis=1).astype(np.int64)
    n_vertices = coords.shape[0]

    # Every vertex carries all 2d labels, so slot index equals label.
    partner = np.empty((n_vertices, k), dtype=np.int64)
    wrap = np.empty((n_vertices, k), dtype=bool)
    for axis in range(d):
        forward = coords.copy()
        forward[:, axis] = (forward[:, axis] + 1) % L
        backward = coords.copy()
        backward[:, axis] = (backward[:, axis] - 1) % L
        fwd_ids = np.ravel_multi_index(tuple(forward.T), shape)
        bwd_ids = np.ravel_multi_index(tuple(backward.T), shape)
        partner[:, axis] = fwd_ids * k + axis + d
        partner[:, axis + d] = bwd_ids * k + axis
        wrap[:, axis] = coords[:, axis] == L - 1
        wrap[:, axis + d] = coords[:, axis] == 0

    lattice = FractalLattice(
        kind=LatticeKind.HYPERCUBIC,
        embedding_dim=d,
        extent=L,
        directions=table,
        coords=_freeze(coords),
        slot_dir=_freeze(np.tile(np.arange(k, dtype=np.int64), (n_vertices, 1))),
        partner=_freeze(partner.reshape(-1)),
        is_wrap=_freeze(wrap.reshape(-1)),
    )
    logger.debug(f"Built {lattice.describe()}")
    return lattice


@dataclass
class CheckResult:
    """Outcome of one invariant check."""

    name: str
    passed: bool
    detail: str = ""
    offender: Optional[Tuple[int, int]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "offender": list(self.offender) if self.offender else None,
        }


@dataclass
class ValidationReport:
    subject: str
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _first(mask: np.ndarray, k: int) -> Optional[Tuple[int, int]]:
    bad = np.flatnonzero(mask)
    if bad.size == 0:
        return None
    return divmod(int(bad[0]), k)


def _check(name: str, bad: np.ndarray, k: int, what: str) -> CheckResult:
    offender = _first(bad, k)
    if offender is None:
        return CheckResult(name, True)
    return CheckResult(name, False, f"{what} at (vertex, slot) {offender}", offender)


def validate(lattice: FractalLattice) -> ValidationReport:
    """Check every structural invariant; failures are reported, not raised."""
    report = ValidationReport(subject=lattice.describe())
    k, n_slots = lattice.k, lattice.n_slots
    partner = np.asarray(lattice.partner)
    labels = lattice.slot_dir.reshape(-1)
    index = np.arange(n_slots)

    expected_k = 2 * lattice.embedding_dim
    if lattice.slot_dir.shape != (lattice.n_vertices, expected_k) or partner.shape != (n_slots,):
        report.checks.append(CheckResult(
            "degree", False,
            f"slot table shape {lattice.slot_dir.shape}, expected ({lattice.n_vertices}, {expected_k})",
        ))
        return report

    in_range = (partner >= 0) & (partner < n_slots)
    report.checks.append(_check("partner_range", ~in_range, k, "partner index out of range"))
    if not in_range.all():
        return report

    report.checks.append(_check("involution", partner[partner] != index, k, "partner(partner) differs"))
    report.checks.append(_check("no_fixed_points", partner == index, k, "slot is its own partner"))

    unsorted = np.zeros_like(lattice.slot_dir, dtype=bool)
    unsorted[:, 1:] = lattice.slot_dir[:, 1:] <= lattice.slot_dir[:, :-1]
    out_of_table = (lattice.slot_dir < 0) | (lattice.slot_dir >= len(lattice.directions))
    report.checks.append(_check(
        "degree", (unsorted | out_of_table).reshape(-1), k,
        "repeated, unsorted or unknown direction label",
    ))
    if out_of_table.any():
        return report

    opposite = np.asarray(lattice.directions.opposite)
    displacement = lattice.directions.as_array()
    geometry = lattice.coords[partner // k] - lattice.coords[index // k]
    mismatched = (labels[partner] != opposite[labels]) | (
        ~lattice.is_wrap & (geometry != displacement[labels]).any(axis=1)
    )
    report.checks.append(_check(
        "direction_consistency", mismatched, k, "link direction disagrees with partner or geometry",
    ))
    report.checks.append(_check(
        "wrap_symmetry", lattice.is_wrap[partner] != lattice.is_wrap, k, "wrap flag differs from partner",
    ))

    if lattice.kind == LatticeKind.GASKET:
        expected_n = vertex_count_closed_form(StageConfig(lattice.embedding_dim, lattice.stage))
        d_e = lattice.embedding_dim
        n_wrap = int(lattice.is_wrap.sum()) // 2
        corners_ok = len(lattice.corners) == d_e + 1 and n_wrap == (d_e + 1) * d_e // 2
        report.checks.append(CheckResult(
            "corners", corners_ok,
            "" if corners_ok else f"{len(lattice.corners)} corners, {n_wrap} wraparound links",
        ))
    else:
        expected_n = lattice.extent ** lattice.embedding_dim
    count_ok = lattice.n_vertices == expected_n
    report.checks.append(CheckResult(
        "vertex_count", count_ok,
        f"N={lattice.n_vertices}" if count_ok else f"N={lattice.n_vertices}, expected {expected_n}",
    ))

    for failure in report.failures():
        logger.error(f"Lattice check '{failure.name}' failed: {failure.detail}")
    return report
