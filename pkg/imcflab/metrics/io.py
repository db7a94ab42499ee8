# imcflab/metrics/io.py
"""Metric definition files and flat array dumps.

Arrays are little-endian 64-bit floats in a flat binary file with a sidecar
`<name>.json` holding the shape, or CSV text.
"""
import logging
import pathlib

import numpy as np
import orjson

from ..errors import ConfigError, LabError
from .grid import GridMetric, flat_grid, make_grid, warped_to_grid
from .warped import WarpedMetric, build_warped, cone_kink_warp, kinked_warp, sampled_warp

logger = logging.getLogger(__name__)

WARPED_KINDS = ("euclidean", "space_form", "spherical", "schwarzschild")


def dump_array(path, arr: np.ndarray) -> pathlib.Path:
    path = pathlib.Path(path)
    arr = np.ascontiguousarray(arr, dtype="<f8")
    path.write_bytes(arr.tobytes())
    side = path.with_suffix(path.suffix + ".json")
    side.write_bytes(orjson.dumps({"shape": list(arr.shape), "dtype": "<f8"}))
    return path


def load_array(path, shape=None) -> np.ndarray:
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError("array file not found", path=str(path))
    if path.suffix == ".csv":
        arr = np.loadtxt(path, delimiter=",", comments="#", dtype=float)
    else:
        arr = np.frombuffer(path.read_bytes(), dtype="<f8").astype(float)
        side = path.with_suffix(path.suffix + ".json")
        if shape is None and side.exists():
            shape = orjson.loads(side.read_bytes())["shape"]
    if shape is not None:
        shape = tuple(int(n) for n in shape)
        if int(np.prod(shape)) != arr.size:
            raise ConfigError(f"array of {arr.size} values does not fit shape {shape}", path=str(path))
        arr = arr.reshape(shape)
    return arr


def _resolve(base: pathlib.Path | None, ref: str) -> pathlib.Path:
    p = pathlib.Path(ref)
    return p if p.is_absolute() or base is None else base / p


def _warped(desc: dict, base) -> WarpedMetric:
    kind = desc["kind"]
    params = dict(desc.get("params") or {})
    if kind in WARPED_KINDS:
        return build_warped(kind, params, desc.get("s_max"))
    if kind == "kinked":
        return kinked_warp(**params)
    if kind == "cone_kink":
        return cone_kink_warp(**params)
    if kind == "sampled":
        if "data" not in desc:
            raise ConfigError("sampled warp needs a data file")
        f = load_array(_resolve(base, desc["data"]))
        if f.ndim == 2 and f.shape[1] == 2:
            return sampled_warp(f[:, 1], s=f[:, 0], modulus=desc.get("modulus"))
        return sampled_warp(f.ravel(), h=desc.get("h"), modulus=desc.get("modulus"))
    raise ConfigError(f"unknown metric kind {kind!r}")


def _grid(desc: dict, base) -> GridMetric:
    kind = desc["kind"]
    if kind == "flat_grid":
        return flat_grid(float(desc.get("half_width", 1.0)), int(desc.get("n", 64)), float(desc.get("scale", 1.0)))
    if kind == "warped_grid":
        inner = load_metric(desc["warped"], base)
        if not isinstance(inner, WarpedMetric):
            raise ConfigError("warped_grid needs a radial metric under 'warped'")
        return warped_to_grid(inner, float(desc.get("half_width", 1.0)), int(desc.get("n", 64)))
    # kind == "grid": explicit samples
    if "data" not in desc:
        raise ConfigError("grid metric needs a data file")
    shape = tuple(desc.get("shape") or ())
    if len(shape) != 3:
        raise ConfigError("grid metric needs shape [nx, ny, nz]")
    g = load_array(_resolve(base, desc["data"]), shape + (3, 3))
    box = desc.get("box") or {}
    if "lo" not in box or "h" not in box:
        raise ConfigError("grid metric needs box.lo and box.h")
    return make_grid(g, np.asarray(box["lo"], dtype=float), float(box["h"]), label=desc.get("label", "grid"))


def load_metric(desc, base=None):
    """Build a metric from a definition dict, or from a JSON file path holding one."""
    if isinstance(desc, (str, pathlib.Path)):
        path = pathlib.Path(desc)
        if not path.exists():
            raise ConfigError("metric file not found", path=str(path))
        try:
            desc = orjson.loads(path.read_bytes())
        except orjson.JSONDecodeError as e:
            raise ConfigError(e.msg, path=str(path), line=e.lineno, column=e.colno) from e
        base = path.parent
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigError("metric definition needs a 'kind'")
    base = pathlib.Path(base) if base is not None else None
    try:
        if desc["kind"] in ("grid", "flat_grid", "warped_grid"):
            m = _grid(desc, base)
        else:
            m = _warped(desc, base)
    except LabError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"bad parameters for {desc['kind']}: {e}") from e
    logger.debug("loaded metric %s", getattr(m, "label", desc["kind"]))
    return m
