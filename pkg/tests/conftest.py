import os
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]


def uci_data_dir() -> Path:
    return Path(os.environ.get("ATD_DATA_DIR", REPO_ROOT / "data" / "uci"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir() -> Path:
    return uci_data_dir()
