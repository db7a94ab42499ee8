import math
from pathlib import Path

import numpy as np
import pytest

from imcflab.cache import DiskCache


def test_arrays_come_back_with_their_shape_and_infinities(tmp_path: Path) -> None:
    cache = DiskCache(root=str(tmp_path), enabled=True)
    w = np.arange(24, dtype=float).reshape(2, 3, 4)
    w[0, 0, 0] = np.inf
    cache.set("green", "k1", w, {"cap": 1.5, "stages": 3})
    arr, meta = cache.get("green", "k1")
    assert arr.shape == (2, 3, 4)
    assert math.isinf(arr[0, 0, 0]) and arr[0, 0, 0] > 0
    assert np.array_equal(arr[np.isfinite(arr)], w[np.isfinite(w)])
    assert meta == {"cap": 1.5, "stages": 3}
    assert len(list((tmp_path / "green").glob("*.json"))) == 1
    assert cache.get("green", "k2") is None


def test_disabled_cache_never_touches_disk(tmp_path: Path) -> None:
    cache = DiskCache(root=str(tmp_path / "off"), enabled=False)
    cache.set("green", "k", np.ones(3))
    assert cache.get("green", "k") is None
    assert not (tmp_path / "off").exists()


def test_nan_values_are_not_cached(tmp_path: Path) -> None:
    cache = DiskCache(root=str(tmp_path), enabled=True)
    with pytest.raises(ValueError):
        cache.set("green", "k", np.array([1.0, np.nan]))
