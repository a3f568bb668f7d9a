import numpy as np
import pytest
from hypothesis import settings

from sawmbir.geometry import make_geometry

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def small_geometry():
    """16^3 volume of 6 mm voxels, 24 views; the z extent overhangs the cone."""
    return make_geometry(volume_dims=(16, 16, 16), voxel_size=(6, 6, 6), num_views=24,
                         detector_cols=24, detector_rows=12)


@pytest.fixture
def tiny_geometry():
    return make_geometry(volume_dims=(8, 8, 8), voxel_size=(8, 8, 8), num_views=12,
                         detector_cols=16, detector_rows=8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
