import pytest

from pawcap.body.skeleton import load_human_topology
from pawcap.oracle.synthetic import ScenarioSpec, generate_motion


@pytest.fixture(scope='session')
def human():
    return load_human_topology()


@pytest.fixture(scope='session')
def scenarios(human):
    """Noise-free ground truth per scenario kind, generated once."""
    cache = {}

    def get(kind, **kwargs):
        key = (kind, tuple(sorted(kwargs.items())))
        if key not in cache:
            cache[key] = generate_motion(ScenarioSpec(kind, **kwargs), human)
        return cache[key]

    return get
