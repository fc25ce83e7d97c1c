import pytest
from hypothesis import HealthCheck, settings

from statetransfer.harness import make_rng, random_states

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return make_rng(20240601)


@pytest.fixture
def one_qubit_states():
    return random_states(1, 5, seed=11)


@pytest.fixture
def two_qubit_states():
    return random_states(2, 5, seed=12)


@pytest.fixture
def write_file(tmp_path):
    def _write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write

