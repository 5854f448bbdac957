import pytest

from fractal_search.core.lattice import StageConfig, build_gasket


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run long sweeps and paper-scale checks"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def gasket_2d_s1():
    return build_gasket(StageConfig(2, 1))


@pytest.fixture(scope="session")
def gasket_2d_s2():
    return build_gasket(StageConfig(2, 2))


@pytest.fixture(scope="session")
def gasket_2d_s4():
    return build_gasket(StageConfig(2, 4))


@pytest.fixture(scope="session")
def gasket_3d_s1():
    return build_gasket(StageConfig(3, 1))


@pytest.fixture(scope="session")
def gasket_3d_s2():
    return build_gasket(StageConfig(3, 2))
