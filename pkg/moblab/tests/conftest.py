import os

# GNU OpenMP (numba's fallback when TBB is too old) kills forked children, which
# hangs the multiprocessing pools; use numba's fork-safe workqueue layer instead.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numba  # noqa: E402
import pytest  # noqa: E402

numba.config.THREADING_LAYER = os.environ["NUMBA_THREADING_LAYER"]


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
