import os

import pytest

from pawcap.body.skeleton import DATA_DIR, load_human_topology, load_topology
from pawcap.geometry.stereo import default_rig
from pawcap.oracle.synthetic import ScenarioSpec, generate_motion, render_views
from pawcap.test.helpers import interleave


@pytest.fixture(scope='module')
def human():
    return load_human_topology()


@pytest.fixture(scope='module')
def cat():
    return load_topology(os.path.join(DATA_DIR, 'cat_skeleton.json'))


@pytest.fixture(scope='module')
def room_rig():
    return default_rig()


@pytest.fixture(scope='module')
def wave_truth(human):
    return generate_motion(ScenarioSpec('wave'), human)


@pytest.fixture(scope='module')
def wave_frames(room_rig, wave_truth):
    return interleave(*render_views(room_rig, wave_truth))


@pytest.fixture(scope='module')
def idle_frames(human, room_rig):
    truth = generate_motion(ScenarioSpec('idle'), human)
    return interleave(*render_views(room_rig, truth))
