import pytest

from kmwave.coefficients import ModelParams, PeriodicFn


def make_params(beta=2.0, gamma=1.0, gammaL=0.1, tau=1.0, S0=1.0, amplitude=0.0, period=1.0,
                d1=1.0, d2=1.0, dL=1.0):
    """Default desk configuration with keyword overrides."""
    return ModelParams(d1=d1, d2=d2, dL=dL, tau=tau, S0=S0,
                       beta=PeriodicFn.cosine(beta, amplitude, period),
                       gamma=PeriodicFn.constant(gamma, period),
                       gammaL=PeriodicFn.constant(gammaL, period))


@pytest.fixture
def params():
    return make_params


@pytest.fixture(scope="session")
def default_periodic():
    return make_params(amplitude=0.2)


# Acceptance criteria append (number, passed, detail); printed after the run.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
