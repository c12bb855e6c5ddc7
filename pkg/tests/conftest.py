import numpy as np
import pytest

from epr_spdc import BBO, BiphotonField, CrystalParams, PumpBeam

Z_FACE = 5.0001

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = []

# (id, w0 mm, z_c mm) of the eight pump configurations
PUMP_BEAMS = [
    (1, 0.062, 178.0),
    (2, 0.067, 213.0),
    (3, 0.072, 251.0),
    (4, 0.085, 298.0),
    (5, 0.095, 355.0),
    (6, 0.105, 422.0),
    (7, 0.120, 510.0),
    (8, 0.142, 635.0),
]


@pytest.fixture(scope="session")
def bbo_crystal():
    return CrystalParams.from_sellmeier(BBO, 5.0, 355.0)


@pytest.fixture(scope="session")
def eight_beam_fields(bbo_crystal):
    return {
        bid: BiphotonField(bbo_crystal, PumpBeam(355.0, w0, zc), nu=0.0)
        for bid, w0, zc in PUMP_BEAMS
    }


@pytest.fixture(scope="session")
def beam1(eight_beam_fields):
    return eight_beam_fields[1]


@pytest.fixture(scope="session")
def beam8(eight_beam_fields):
    return eight_beam_fields[8]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
