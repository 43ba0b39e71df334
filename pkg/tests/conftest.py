import pytest

from topdown_pose.oracle import load_fixture


@pytest.fixture(scope="session")
def fixture_set():
    return load_fixture()
