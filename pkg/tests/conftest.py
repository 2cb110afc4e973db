import sys
from pathlib import Path

import pytest

# make the oracle helpers importable as a plain module from any test file
sys.path.insert(0, str(Path(__file__).parent))

from artifact.geometry import SpiralParams, synth_cochlea


@pytest.fixture(scope="session")
def default_scene():
    """One shared synthetic scene (seed 0); treat as read-only."""
    return synth_cochlea(SpiralParams(seed=0))


@pytest.fixture(scope="session")
def expected_dir():
    return Path(__file__).parent / "expected"
