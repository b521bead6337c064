import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from convexcip.assembly import compute_Q  # noqa: E402
from convexcip.basis import build_basis  # noqa: E402
from convexcip.forward import SourceSpec  # noqa: E402
from convexcip.grid import FrequencyGrid, Grid3  # noqa: E402

WINDOW = (6.72, 9.45)


@pytest.fixture(scope="session")
def window_kgrid():
    return FrequencyGrid.simpson(*WINDOW, 31)


@pytest.fixture(scope="session")
def basis6(window_kgrid):
    return build_basis(6, window_kgrid)


@pytest.fixture(scope="session")
def small_problem():
    """11^3 grid on the unit box, N=3 basis and its Q field."""
    grid = Grid3(1.0, 1.0, 11, 11, 11)
    basis = build_basis(3, FrequencyGrid.simpson(*WINDOW, 11))
    Q = compute_Q(basis, SourceSpec(), grid)
    return grid, basis, Q


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CUBE = {
    "medium": {"shapes": [{"type": "box", "center": [0.0, 0.0, -1.0], "size": [1.0, 1.0, 1.0], "c": 5.0}]},
    "simulate": {"noise_pct": 2.0},
}


@pytest.fixture(scope="session")
def cube_run(tmp_path_factory):
    """Full pipeline on the unit cube with c = 5 at default settings."""
    from convexcip.config import RunConfig
    from convexcip.pipeline import run_pipeline

    out = tmp_path_factory.mktemp("cube")
    cfg = RunConfig(CUBE)
    records = run_pipeline(cfg, out)
    return cfg, out, records
