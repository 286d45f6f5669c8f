import pytest

from app.core.config import WorldConfig
from app.training.trainer import run_training
from app.world.dataset import generate_dataset, save_dataset
from tests.helpers import small_config


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow training acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def tiny_world() -> WorldConfig:
    return WorldConfig(grid_size=8, grid_h=2, grid_w=2, max_objects=2, concepts=6, questions_per_scene=2)


@pytest.fixture
def world_config():
    return tiny_world()


@pytest.fixture
def tiny_dataset(world_config):
    return generate_dataset(7, 8, 4, world_config)


@pytest.fixture
def caption_config():
    return small_config()


@pytest.fixture
def vqa_config():
    return small_config(task="vqa")


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """A saved tiny dataset shared by the slower end-to-end tests."""
    train, test, vocab = generate_dataset(7, 8, 4, tiny_world())
    return save_dataset(tmp_path_factory.mktemp("data"), train, test, vocab, tiny_world())


@pytest.fixture(scope="session")
def trained_checkpoints(tmp_path_factory):
    """Caption and vqa checkpoints after one short epoch each."""
    train, _, vocab = generate_dataset(7, 8, 4, tiny_world())
    root = tmp_path_factory.mktemp("runs")
    return {
        task: run_training(small_config(task=task), train, vocab, root / task).checkpoint
        for task in ("caption", "vqa")
    }
