import numpy as np
import pytest

from pawcap.geometry.stereo import CameraModel, default_rig
from pawcap.test.helpers import parallel_rig


@pytest.fixture
def rig():
    return parallel_rig()


@pytest.fixture
def room_rig():
    return default_rig()


@pytest.fixture
def camera():
    return CameraModel(0, 1000.0, 1000.0, 960.0, 540.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20)
