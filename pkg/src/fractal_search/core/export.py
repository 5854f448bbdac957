"""
Flat-file outputs: CSV tables, the JSON fit report, and text dumps of
lattices and walk states.

CSV files start with one ``#`` comment line naming the table and its format
version; read them back with ``pandas.read_csv(path, comment="#")``.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, TextIO, Union

import jsonschema
import numpy as np
import pandas as pd

from fractal_search.core.lattice import (
    GASKET_2D_DIRECTIONS,
    GASKET_3D_DIRECTIONS,
    DirectionTable,
    FractalLattice,
    LatticeKind,
)
from fractal_search.core.walk import WalkState, probability_distribution

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FLOAT_FORMAT = "%.17g"

SERIES_COLUMNS = ["block_index", "probability"]
SUMMARY_COLUMNS = ["d_E", "S", "N", "t1", "ancilla", "cos_delta", "Q", "P", "Q_over_sqrtP"]
SPECTRUM_COLUMNS = ["re", "im"]

PathLike = Union[str, Path]

_FIT_SCHEMA = {
    "type": "object",
    "properties": {
        "slope": {"type": "number"},
        "intercept": {"type": "number"},
        "rms": {"type": "number", "minimum": 0},
        "systematic_err": {"type": ["number", "null"]},
        "intercept_err": {"type": ["number", "null"]},
        "range": {"type": "array", "items": {"type": "integer"}},
        "n_points": {"type": "integer", "minimum": 3},
        "prefactor": {"type": "number"},
    },
    "required": ["slope", "intercept", "rms", "systematic_err", "range", "prefactor"],
}

FIT_REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "d_E": {"type": "integer", "enum": [2, 3]},
        "stages": {"type": "array", "items": {"type": "integer"}},
        "fit_stages": {"type": "array", "items": {"type": "integer"}},
        "failed_stages": {"type": "array", "items": {"type": "integer"}},
        "fits": {"type": "object", "additionalProperties": {"anyOf": [_FIT_SCHEMA, {"type": "null"}]}},
    },
    "required": ["format_version", "d_E", "stages", "fits"],
}


def _ensure_parent(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_table(path: PathLike, kind: str, frame: pd.DataFrame):
    """Write ``frame`` as CSV behind a versioned comment header."""
    path = _ensure_parent(path)
    with open(path, "w", newline="") as f:
        f.write(f"# fractal-search {kind} v{FORMAT_VERSION}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {kind} table ({len(frame)} rows) to {path}")


def read_table(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_series(path: PathLike, series: Sequence[float]):
    frame = pd.DataFrame({"block_index": np.arange(len(series)), "probability": np.asarray(series)})
    write_table(path, "series", frame[SERIES_COLUMNS])


def write_summary(path: PathLike, rows: Iterable[Dict[str, Any]]):
    frame = pd.DataFrame(list(rows), columns=SUMMARY_COLUMNS)
    write_table(path, "summary", frame)


def write_snapshot(path: PathLike, state: WalkState):
    """Per-vertex probability with embedding coordinates."""
    coords = state.lattice.coords
    axes = ["x", "y", "z"][: coords.shape[1]]
    frame = pd.DataFrame(coords, columns=axes)
    frame["probability"] = probability_distribution(state)
    write_table(path, "snapshot", frame)


def write_spectrum(path: PathLike, eigenvalues: np.ndarray):
    values = np.asarray(eigenvalues)
    frame = pd.DataFrame({"re": values.real, "im": values.imag})
    write_table(path, "spectrum", frame[SPECTRUM_COLUMNS])


def validate_fit_report(report: Dict[str, Any]):
    jsonschema.validate(instance=report, schema=FIT_REPORT_SCHEMA)


def write_fit_report(path: PathLike, report: Dict[str, Any]):
    """
    Validate and write the fit report.

    Raises:
        jsonschema.exceptions.ValidationError: the report does not match the schema.
    """
    validate_fit_report(report)
    path = _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Wrote fit report to {path}")


def write_lattice_dump(stream: TextIO, lattice: FractalLattice):
    """
    Header ``d_E S N k``, then one line per slot:
    ``vertex x y [z] slot dir partner_vertex partner_slot wrap``.
    """
    k = lattice.k
    stage = lattice.stage if lattice.stage is not None else 0
    stream.write(f"{lattice.embedding_dim} {stage} {lattice.n_vertices} {k}\n")
    partner = np.asarray(lattice.partner)
    for v in range(lattice.n_vertices):
        coord = " ".join(str(int(c)) for c in lattice.coords[v])
        for j in range(k):
            flat = v * k + j
            pv, pj = divmod(int(partner[flat]), k)
            stream.write(
                f"{v} {coord} {j} {int(lattice.slot_dir[v, j])} {pv} {pj} "
                f"{int(lattice.is_wrap[flat])}\n"
            )


def read_lattice_dump(stream: TextIO) -> FractalLattice:
    """Rebuild a gasket from a dump; no validation is applied, see ``lattice.validate``."""
    d_e, stage, n, k = (int(x) for x in stream.readline().split())
    rows = np.loadtxt(stream, dtype=np.int64, ndmin=2)
    if rows.shape != (n * k, d_e + 6):
        raise ValueError(f"Lattice dump has shape {rows.shape}, expected ({n * k}, {d_e + 6})")
    table: DirectionTable = GASKET_2D_DIRECTIONS if d_e == 2 else GASKET_3D_DIRECTIONS
    coords = rows[::k, 1:1 + d_e].copy()
    slot_dir = rows[:, 2 + d_e].reshape(n, k).copy()
    partner = rows[:, 3 + d_e] * k + rows[:, 4 + d_e]
    is_wrap = rows[:, 5 + d_e].astype(bool)
    corners = tuple(int(v) for v in np.unique(rows[is_wrap, 0]))
    return FractalLattice(
        kind=LatticeKind.GASKET,
        embedding_dim=d_e,
        extent=1 << stage,
        directions=table,
        coords=coords,
        slot_dir=slot_dir,
        partner=partner,
        is_wrap=is_wrap,
        corners=corners,
        stage=stage,
    )


def write_state_dump(stream: TextIO, state: WalkState):
    """Header ``N k layers``, then ``layer vertex slot re im`` per nonzero amplitude."""
    lattice = state.lattice
    stream.write(f"{lattice.n_vertices} {lattice.k} {state.ancilla_layers}\n")
    blocks = state.by_vertex()
    for layer, v, j in zip(*np.nonzero(blocks)):
        a = blocks[layer, v, j]
        stream.write(f"{layer} {v} {j} {float(a.real)!r} {float(a.imag)!r}\n")

