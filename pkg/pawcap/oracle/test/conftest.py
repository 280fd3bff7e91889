import pytest

from pawcap.body.skeleton import load_human_topology
from pawcap.geometry.stereo import default_rig
from pawcap.oracle.synthetic import ScenarioSpec, generate_motion


@pytest.fixture(scope='module')
def human():
    return load_human_topology()


@pytest.fixture(scope='module')
def room_rig():
    return default_rig()


@pytest.fixture(scope='module')
def wave(human):
    return generate_motion(ScenarioSpec('wave', seed=3), human)
