import glob
import os

import pytest

from rowsim.engine import simulate
from rowsim.scenario import load_scenario

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, f"{name}.json")


def all_scenario_paths():
    return sorted(glob.glob(os.path.join(SCENARIO_DIR, "*.json")))


@pytest.fixture(scope="session")
def canonical_scenario():
    return load_scenario(scenario_path("canonical_burst"))


@pytest.fixture(scope="session")
def canonical_log(canonical_scenario):
    return simulate(canonical_scenario)


@pytest.fixture(scope="session")
def flisr_log():
    scn = load_scenario(scenario_path("feeder_trip_flisr"))
    return scn, simulate(scn)
