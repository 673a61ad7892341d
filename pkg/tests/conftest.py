import numpy as np
import pytest

from lvadbench.model import Simulation
from lvadbench.params import CvsParameters, PumpParameters
from lvadbench.protocol import RunSetup
from lvadbench.scenario import SCENARIO_KINDS, make_scenario


@pytest.fixture(scope="session")
def nominal_setup():
    return RunSetup()


@pytest.fixture(scope="session")
def steady_trace():
    """60 s of the nominal patient at constant 2400 rpm."""
    sim = Simulation(CvsParameters(), PumpParameters(), capacity_s=60.0)
    sim.run_block(60.0, 2400.0)
    return sim.trace()


@pytest.fixture(scope="session")
def scenario_traces():
    """400 s constant-speed traces, one per scenario, nominal patient."""
    out = {}
    for kind in SCENARIO_KINDS:
        params = CvsParameters()
        schedule = make_scenario(kind).compile(params, onset_s=250.0)
        sim = Simulation(params, PumpParameters(), schedule=schedule,
                         capacity_s=400.0)
        sim.run_block(400.0, 2400.0)
        out[kind] = (sim, sim.trace())
    return out


@pytest.fixture(scope="session")
def truth_of():
    def _truth(trace):
        return [(t, v) for _, t, v in trace.true_lvedp()]
    return _truth


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
