from pathlib import Path

import pytest

from analytic_hecke.coeffio import ingest_coefficients

FIXTURES = Path(__file__).resolve().parent / "fixtures"
LEVEL2_PATH = FIXTURES / "level2_weight8.json"
LEVEL3_PATH = FIXTURES / "level3_weight6.json"


@pytest.fixture(scope="session")
def level2_file():
    return ingest_coefficients(LEVEL2_PATH)


@pytest.fixture(scope="session")
def level3_file():
    return ingest_coefficients(LEVEL3_PATH)


@pytest.fixture(scope="session")
def level2(level2_file):
    # sign left unset so that it is certified, not read from the file
    cf = level2_file
    from analytic_hecke.qexp import from_coefficients

    return from_coefficients(cf.level, cf.weight, cf.coefficients)


@pytest.fixture(scope="session")
def level3(level3_file):
    cf = level3_file
    from analytic_hecke.qexp import from_coefficients

    return from_coefficients(cf.level, cf.weight, cf.coefficients)
