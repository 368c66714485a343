import sys

import numpy as np
import pytest

from artifact import geometry


@pytest.fixture(scope="session")
def circle64():
    return geometry.discretize(geometry.make_curve("unit-circle"), 64)


@pytest.fixture(scope="session")
def circle128():
    return geometry.discretize(geometry.make_curve("unit-circle"), 128)


@pytest.fixture(scope="session")
def arc128():
    return geometry.discretize(geometry.make_curve("circular-arc", aperture=1.25), 128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def arc_config(**kw):
    """Open arc, aperture 1.25, Gaussian pulse at 8.5 over [4, 13], observed at the origin."""
    from artifact.pipeline import SimulationConfig
    d = dict(curve={"kind": "circular-arc", "aperture": 1.25}, N=128,
             incident={"profile": "gaussian", "omega0": 8.5, "sigma2": 0.5, "direction": [0.0, 1.0]},
             band=[4.0, 13.0], J=200, h=0.5, points=[[0.0, 0.0]],
             times={"start": 0.0, "stop": 120.0, "count": 500})
    d.update(kw)
    return SimulationConfig.from_dict(d)


@pytest.fixture(scope="session")
def arc_ss():
    from artifact import pipeline
    return pipeline.run_fth_ss(arc_config())


def disk_config(**kw):
    """Closed unit circle with the reduced-frequency Gaussian pulse."""
    from artifact.pipeline import SimulationConfig
    d = dict(curve={"kind": "unit-circle"}, N=128,
             incident={"profile": "gaussian", "omega0": 11.0, "sigma2": 0.5, "direction": [1.0, 0.0]},
             band=[6.5, 15.5], J=50, h=0.5, points=[[0.0, -1.3]],
             times={"start": 0.0, "stop": 20.0, "count": 500})
    d.update(kw)
    return SimulationConfig.from_dict(d)


@pytest.fixture(scope="session")
def arc_reference():
    """Dense brute-force reference for the arc case (J = 2000, 2N boundary nodes)."""
    from artifact import pipeline
    return pipeline.reference_brute_force(arc_config(J=200), 10)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = sorted(getattr(mod, "REPORTS", []), key=lambda s: int(s.split()[1].rstrip(":")))
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
