import sys
from pathlib import Path

import numpy as np
import pytest

from geodom import gallery
from geodom import problem as pb

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def problems():
    """Every gallery problem, parsed."""
    return {name: pb.from_dict(gallery.get(name)) for name in gallery.names()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
