import math

import pytest

from ersatzns.spectral_core import TorusGrid


@pytest.fixture
def grid2():
    return TorusGrid(2, 2 * math.pi, 16)


@pytest.fixture
def grid3():
    return TorusGrid(3, 2 * math.pi, 16)
