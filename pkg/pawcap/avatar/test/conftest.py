import os

import numpy as np
import pytest

from pawcap.avatar.response import load_clip_library
from pawcap.avatar.retargeting import auto_map
from pawcap.body.skeleton import DATA_DIR, load_human_topology, load_topology


@pytest.fixture(scope='module')
def human():
    return load_human_topology()


@pytest.fixture(scope='module')
def cat():
    return load_topology(os.path.join(DATA_DIR, 'cat_skeleton.json'))


@pytest.fixture(scope='module')
def cat_map(human, cat):
    return auto_map(human, cat)


@pytest.fixture(scope='module')
def library(cat):
    return load_clip_library(os.path.join(DATA_DIR, 'clips.json'), cat)


@pytest.fixture
def rng():
    return np.random.default_rng(31)
