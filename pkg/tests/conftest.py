import pytest

from fedfda.wavelet import build_table, family


@pytest.fixture(scope="session")
def haar_table():
    return build_table(family("haar"), 12)


@pytest.fixture(scope="session")
def db2_table():
    return build_table(family("db2"), 14)
