import pytest

from bison.group import Ristretto255Group, TestGroup


@pytest.fixture(scope="session")
def tg() -> TestGroup:
    return TestGroup()


@pytest.fixture(scope="session")
def rg() -> Ristretto255Group:
    return Ristretto255Group()
