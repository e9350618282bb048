"""
Shared parameter sets for the test suite
"""

import math
import os
import sys

import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.config import Config
from core.model import BeamConfig, TrapConfig, rubidium_preset

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')

slow = pytest.mark.skipif(
    os.getenv('MIRRORCOOL_SLOW_TESTS') != '1',
    reason='long Monte-Carlo run; set MIRRORCOOL_SLOW_TESTS=1',
)


@pytest.fixture
def rubidium():
    """Rubidium D2 constants"""
    return rubidium_preset()


@pytest.fixture
def profile_beam(rubidium):
    """s = 0.1, sigma_a / (pi w^2) = 0.1, detuning -50 Gamma, mirror at 3 m"""
    waist = (rubidium.cross_section / (math.pi * 0.1)) ** 0.5
    return BeamConfig(waist=waist, saturation=0.1, detuning=-50.0 * rubidium.gamma,
                      mirror_distance=3.0)


@pytest.fixture
def trapped_beam(rubidium):
    """1.4 um mode diameter, s = 0.073, 26.5 ns round trip"""
    return BeamConfig.from_delay(26.5e-9, waist=0.7e-6, saturation=0.073,
                                 detuning=-50.0 * rubidium.gamma)


@pytest.fixture
def free_beam(rubidium):
    """Same beam with a 20 us round trip, so tau/10 admits microsecond steps without a trap"""
    return BeamConfig.from_delay(2e-5, waist=0.7e-6, saturation=0.073,
                                 detuning=-50.0 * rubidium.gamma)


@pytest.fixture
def fast_trap():
    """1.5 MHz trap centred at the maximum-friction offset"""
    return TrapConfig(frequency=1.5e6)


@pytest.fixture(autouse=True)
def no_log_file(monkeypatch):
    """Keep test runs from writing the log file"""
    monkeypatch.setattr(Config, 'LOG_FILE', '')


def config_path(name: str) -> str:
    return os.path.join(CONFIG_DIR, name)
