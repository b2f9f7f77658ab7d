import pytest

from gamma2lab.inequality_suite import corpus
from gamma2lab.sphere_zonal_calculus import build_grid, random_positive_field


@pytest.fixture(scope='session')
def grid2():
    return build_grid(2, 64)


@pytest.fixture(scope='session')
def grid3():
    return build_grid(3, 64)


@pytest.fixture(scope='session')
def field2(grid2):
    return random_positive_field(grid2, 3)


@pytest.fixture(scope='session')
def corpus2(grid2):
    return corpus(grid2, 42, 6)


@pytest.fixture(scope='session')
def corpus3(grid3):
    return corpus(grid3, 42, 6)
