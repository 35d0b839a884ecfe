import numpy as np
import pytest

import wtcs

DATA_DIR = __import__("pathlib").Path(__file__).parent / "data"

CAMERA_PGM = DATA_DIR / "camera256.pgm"
MOON_PGM = DATA_DIR / "moon256.pgm"


@pytest.fixture(scope="session")
def camera256():
    return wtcs.read_image(CAMERA_PGM)


@pytest.fixture(scope="session")
def moon256():
    return wtcs.read_image(MOON_PGM)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
