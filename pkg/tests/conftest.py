import warnings

import pytest

from yukstripe.stripes1d import rescale_params_for


def _params(M, d=3):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return rescale_params_for(M, d=d)


@pytest.fixture(scope="session")
def params12():
    return _params(12.0)


@pytest.fixture(scope="session")
def params10():
    return _params(10.0)


@pytest.fixture(scope="session")
def params8():
    return _params(8.0)


@pytest.fixture(autouse=True)
def _quiet_asymptotic_warnings():
    # RescaleParams warns that gamma_M and h*/M sit outside the asymptotic
    # brackets at desk scale; that is expected throughout the suite
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*asymptotic.*")
        yield
