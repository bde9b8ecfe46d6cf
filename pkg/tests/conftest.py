"""Test fixtures."""
import logging
from pathlib import Path

import numpy as np
import pytest

from socheck.core.funcdsl import FunctionDef, abs_, var
from socheck.core.settings import CheckConfig
from socheck.harness.corpus import CORPUS_BUILDERS

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "problems"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: corpus run against the grid oracle")


@pytest.fixture
def fast_cfg():
    return CheckConfig(samples=60, radii=(1e-2, 1e-3), seed=0)


@pytest.fixture
def problems_dir():
    return PROBLEMS_DIR


@pytest.fixture
def signed_square():
    """f(x, y) = x|x|/2 + y^2, second-order subdifferential [-1, 1] x {2} at 0."""
    x, y = var(0), var(1)
    return FunctionDef("signed_square", 2, 0.5 * x * abs_(x) + y ** 2)


@pytest.fixture
def quadratic():
    x, y = var(0), var(1)
    return FunctionDef("quadratic", 2, 3 * x ** 2 + x * y + 2 * y ** 2)


@pytest.fixture(params=sorted(CORPUS_BUILDERS))
def corpus_entry(request):
    return CORPUS_BUILDERS[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def reset_package_logging():
    """Drop handlers installed by main() so later tests don't write to a closed capture stream."""
    yield
    for name in ("socheck", "py.warnings"):
        logging.getLogger(name).handlers.clear()
    logging.getLogger("socheck").setLevel(logging.NOTSET)
    logging.captureWarnings(False)
