import os

import pytest

from tsreason.forge import GenConfig, build_dataset

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def wrap(answer: str) -> str:
    """A minimal schema-complete response around an answer payload."""
    return f"<think>worked it out.</think><answer>{answer}</answer>"


@pytest.fixture(scope="session")
def small_dataset():
    """48 samples, 3 per task/split cell, fixed seed."""
    return build_dataset(GenConfig.uniform(7, 3))
