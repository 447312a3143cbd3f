import pytest

from rdslab.noise import make_path


@pytest.fixture(scope="session")
def std_path():
    """Shared medium-resolution two-sided path."""
    return make_path(seed=77, dt=0.01, horizon=(-20, 20), channels=6)
