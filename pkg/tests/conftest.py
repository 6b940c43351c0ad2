import numpy as np
import pytest

from riemdiff.manifolds import (euclidean_spec, grassmann_spec, make_manifold,
                                sphere_spec)
from riemdiff.rng import substream

ALL_SPECS = {
    "euclidean": euclidean_spec(4),
    "sphere": sphere_spec(2),
    "grassmann": grassmann_spec(6, 2),
}

# filled by the acceptance module; echoed after the run so the per-criterion
# lines survive pytest's output capture
CRITERION_LINES: list = []


@pytest.fixture(params=list(ALL_SPECS))
def manifold(request):
    return make_manifold(ALL_SPECS[request.param])


def rng(*key: int) -> np.random.Generator:
    return substream(20240817, *key)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
