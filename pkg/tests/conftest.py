import os

import numpy as np
import pytest


@pytest.fixture(scope="session", autouse=True)
def _reference_cache(tmp_path_factory):
    """Keep reference solutions out of the user's cache unless one is configured."""
    if "OPSPLIT_CACHE_DIR" not in os.environ:
        os.environ["OPSPLIT_CACHE_DIR"] = str(tmp_path_factory.mktemp("refcache"))
    yield


@pytest.fixture(autouse=True)
def _quiet_overflow():
    # explicit sub-steps beyond their stability limit overflow by design in sweeps
    with np.errstate(over="ignore", invalid="ignore"):
        yield
