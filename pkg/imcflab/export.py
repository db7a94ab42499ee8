# imcflab/export.py
"""CSV and JSON artifacts with fixed float formatting."""
import csv
import pathlib

import numpy as np
import orjson

from . import __version__
from .utils import fmt

COLUMN_DOCS = {
    "t": "flow time of the level {w < t}",
    "volume": "metric volume of the sublevel set",
    "perimeter": "metric area of the level surface",
    "perimeter_ratio": "perimeter / (4 pi e^t)",
    "components": "connected components of the sublevel set",
    "boundary_components": "connected components of the level surface",
    "H2_integral": "integral of |grad w|^2 over the level surface",
    "inv_grad_integral": "integral of 1/|grad w| over the level surface",
    "hawking": "Hawking mass of the level surface",
    "mQL": "quasi-local isoperimetric mass of the sublevel set",
    "containment_radius": "largest distance from the pole reached by the sublevel set",
    "holder_residual": "P^3 / (int |grad w|^2 (int 1/|grad w|)^2) - 1",
    "s": "chart radius",
    "w": "log-transformed potential -(p-1) log G",
    "G": "Green function",
    "f": "warp",
    "area": "area of the centred sphere",
    "R": "scalar curvature (nan at flagged corners)",
    "index": "family member index",
    "ref": "family member reference",
    "tail": "1 when the member belongs to the tail used for the mass estimate",
    "V": "enclosed volume",
    "I": "area of the centred ball of volume V",
    "I_eucl": "Euclidean profile (36 pi)^(1/3) V^(2/3)",
    "mass": "2/I (V - I^(3/2)/(6 sqrt(pi)))",
    "eps": "scalar-curvature defect of the member",
    "T": "final flow time log(P_target / 4 pi)",
    "rho": "radius from the target perimeter and xi",
    "ratio": "|E| 6 sqrt(pi) / P_target^(3/2)",
    "bound": "(1 + (2/3) eps e^T)^(-1/2)",
    "theta": "P(E) / P_target",
    "reach": "largest distance from the pole reached by the set",
    "contained": "1 when the set lies in B_(rho-1)",
    "check": "acceptance check id",
    "suite": "verification suite",
    "measured": "measured value",
    "margin": "signed slack, negative when violated",
    "passed": "1 when the check passed",
    "detail": "human-readable detail",
}


def write_csv(path, rows: list[dict], columns: list[str] | None = None, meta: dict | None = None) -> pathlib.Path:
    """One row per record; '#' header lines document the metadata and every column."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = columns or (list(rows[0].keys()) if rows else [])
    with path.open("w", newline="", encoding="utf-8") as f:
        for k, v in (meta or {}).items():
            f.write(f"# {k}: {v}\n")
        for c in columns:
            f.write(f"# column {c}: {COLUMN_DOCS.get(c, c)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])
    return path


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, float, np.integer, np.floating)):
        return fmt(v)
    return "" if v is None else str(v)


def _default(obj):
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, pathlib.Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(payload: dict, scenario_hash: str = "") -> bytes:
    body = {"version": __version__, "scenario_hash": scenario_hash} | payload
    return orjson.dumps(body, default=_default,
                        option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY
                        | orjson.OPT_NON_STR_KEYS)


def write_json(path, payload: dict, scenario_hash: str = "") -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_json(payload, scenario_hash))
    return path
