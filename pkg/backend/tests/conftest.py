import pytest

from app.config import DEFAULT_ENGINE_CONFIG, load_run_config
from app.services.fls import load_engine_config


@pytest.fixture(scope="session")
def engine_config():
    return load_engine_config(DEFAULT_ENGINE_CONFIG)


@pytest.fixture(scope="session")
def run_config():
    return load_run_config()


@pytest.fixture
def output_dir(tmp_path):
    return tmp_path / "out"
