from pathlib import Path

import pytest

from hullsim import harness

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

CONFIG_FILES = {
    "e1": "e1_interval_rate.cfg",
    "e2": "e2_state_sigma.cfg",
    "e3": "e3_shrinking_ball.cfg",
    "e4": "e4_square_hpoly.cfg",
}


@pytest.fixture(scope="session")
def frozen_configs():
    return {
        name: harness.load_config(CONFIG_DIR / fname)
        for name, fname in CONFIG_FILES.items()
    }


@pytest.fixture(scope="session")
def default_reports(frozen_configs):
    """One full run of each default experiment, shared across the session."""
    return {
        name: harness.run_experiment(config)
        for name, config in frozen_configs.items()
    }
