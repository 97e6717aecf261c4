import numpy as np
import pytest

from quietlaser.constants import CouplingParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def coupling_grid():
    """(rabi, gamma) pairs on both sides of the alpha and kappa branch points."""
    return [CouplingParams.from_rabi(r, 1.0) for r in (0.05, 0.3, 0.5, 0.9, 1.0, 1.7, 4.0, 12.0)]
