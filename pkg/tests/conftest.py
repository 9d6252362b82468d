import hypothesis
import pytest

from laca.scenarios import URGENT_FIRST_COUNTEREXAMPLE, load

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def counterexample():
    return load(URGENT_FIRST_COUNTEREXAMPLE)
