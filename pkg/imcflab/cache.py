# imcflab/cache.py
"""Disk cache of lattice solves: one orjson file per sha12(key) under <root>/<ns>/."""
import pathlib

import numpy as np
import orjson

from .config import CONF
from .utils import sha12

# orjson has no inf; excised pole nodes are stored as +-BIG
BIG = 1e300


class DiskCache:
    def __init__(self, root: str = CONF.cache_dir, enabled: bool = CONF.use_cache):
        self.root = pathlib.Path(root)
        self.enabled = enabled

    def _path(self, ns: str, key: str) -> pathlib.Path:
        d = self.root / ns
        d.mkdir(parents=True, exist_ok=True)
        return d / f"{sha12(key)}.json"

    def get(self, ns: str, key: str):
        """(array, meta) stored under key, or None on a miss or when disabled."""
        if not self.enabled:
            return None
        p = self._path(ns, key)
        if not p.exists():
            return None
        hit = orjson.loads(p.read_bytes())
        arr = np.asarray(hit["data"], dtype=float).reshape(hit["shape"])
        arr[np.abs(arr) >= BIG] = np.copysign(np.inf, arr[np.abs(arr) >= BIG])
        return arr, hit.get("meta", {})

    def set(self, ns: str, key: str, arr, meta: dict | None = None):
        if not self.enabled:
            return
        arr = np.clip(np.ascontiguousarray(arr, dtype=float), -BIG, BIG)
        if np.isnan(arr).any():
            raise ValueError(f"refusing to cache NaN values under {ns}/{key}")
        body = {"shape": list(arr.shape), "data": arr.ravel(), "meta": meta or {}}
        self._path(ns, key).write_bytes(orjson.dumps(body, option=orjson.OPT_SERIALIZE_NUMPY))


CACHE = DiskCache()
