import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qbound.estimators import OptimalPrecisionModel  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def shared_cache(tmp_path_factory):
    """One optimizer cache for the whole session, so each (N, eta) is solved once."""
    return tmp_path_factory.mktemp("optimizer-cache") / "cache.jsonl"


@pytest.fixture(scope="session")
def fitted_model(shared_cache):
    models = {}

    def get(eta, fit_range=None):
        key = (eta, fit_range)
        if key not in models:
            models[key] = OptimalPrecisionModel(
                eta=eta, fit_range=fit_range, cache_path=shared_cache
            ).fit()
        return models[key]

    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
