"""Shared fixtures: the default two-node RC plant and sampled responses of it."""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from core.config import Config
from core.models import InputProfile, RCParams
from core.plant import rc_params_truth, rc_system, simulate

PULSE = InputProfile(kind='pulse', amplitude=1.5, period=1200.0)
PRBS = InputProfile(kind='prbs', amplitude=1.5, chip=60.0, seed=3)


@pytest.fixture(scope='session')
def rc():
    return rc_system(RCParams())


@pytest.fixture(scope='session')
def truth():
    return rc_params_truth(RCParams())


@pytest.fixture(scope='session')
def pulse_trajectory():
    """Noise-free pulse response, Ts = 2 s over 6000 s."""
    return simulate(rc_system(RCParams()), PULSE, Ts=2.0, duration=6000.0)


@pytest.fixture(scope='session')
def prbs_trajectory():
    """Noise-free PRBS response, Ts = 0.5 s over 400 s, starting off equilibrium."""
    return simulate(rc_system(RCParams()), PRBS, x0=[24.0, 21.0], Ts=0.5, duration=400.0)


@pytest.fixture
def config(tmp_path):
    return Config(scenarios_dir=ROOT / 'scenarios', out_dir=tmp_path / 'out')
