import os

import pytest

from imcflab.cache import CACHE
from imcflab.metrics.warped import build_warped


def pytest_collection_modifyitems(config, items):
    if os.getenv("IMCFLAB_SLOW", "0") == "1":
        return
    skip = pytest.mark.skip(reason="lattice run; set IMCFLAB_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def _no_disk_cache(monkeypatch):
    monkeypatch.setattr(CACHE, "enabled", False)


@pytest.fixture
def euclid():
    return build_warped("euclidean", s_max=10.0)


@pytest.fixture
def schwarzschild():
    return build_warped("schwarzschild", {"m": 1.0})


@pytest.fixture
def hyperbolic():
    return build_warped("space_form", {"a": 1.0})
