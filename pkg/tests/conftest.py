import os

import numpy as np
import pytest
from hypothesis import settings

np.seterr(all="warn")

settings.register_profile("dev", max_examples=25, deadline=None)
settings.register_profile("ci", max_examples=100, deadline=None, derandomize=True)
settings.register_profile("fast", max_examples=5, deadline=None, derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture
def rng():
    """A generator with a fixed seed for statistical checks."""
    return np.random.default_rng(20240611)
