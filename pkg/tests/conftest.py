import pytest

from nvefield.fitting import DEFAULT_DETUNINGS, SplittingModel, fit_susceptibilities, synthesize_splittings
from nvefield.spectrum import SampleParams, SpectrumModel

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def model():
    return SpectrumModel(SampleParams())


@pytest.fixture(scope="session")
def splitting_model(model):
    return SplittingModel(base=model)


@pytest.fixture(scope="session")
def synthetic_data(splitting_model):
    """Splittings at the default detunings from (1.43, 0.68) with 0.1 MHz noise."""
    return synthesize_splittings(DEFAULT_DETUNINGS, 1.43, 0.68, 0.1, rng_seed=0, model=splitting_model)


@pytest.fixture(scope="session")
def synthetic_fit(synthetic_data, splitting_model):
    return fit_susceptibilities(synthetic_data, model=splitting_model)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("ab")), str(k))):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
