import logging

import pytest

from uniradon.phantoms import disc, gaussian, phantom
from uniradon.radon import AngularGrid, RadialGrid, direct_radon_analytic


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("uniradon").setLevel(logging.ERROR)
    yield


@pytest.fixture(scope="session")
def gauss_sino():
    return direct_radon_analytic(phantom(gaussian()), RadialGrid.symmetric(4.0, 513), AngularGrid.full_circle(360))


@pytest.fixture(scope="session")
def disc_sino():
    return direct_radon_analytic(phantom(disc()), RadialGrid.symmetric(2.0, 513), AngularGrid.full_circle(360))


@pytest.fixture(scope="session")
def offdisc_sino():
    spec = phantom(disc(center=(0.5, 0.0)))
    return direct_radon_analytic(spec, RadialGrid.symmetric(2.0, 513), AngularGrid.full_circle(360))
