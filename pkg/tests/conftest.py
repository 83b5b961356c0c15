import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dressform.body import synth_body_model
from dressform.kinematics import default_tree

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def tree():
    return default_tree()


@pytest.fixture(scope="session")
def model():
    return synth_body_model()


@pytest.fixture(scope="session")
def snapshot():
    return json.loads((DATA / "template_snapshot.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
