import pytest

from core.languages import get_language


@pytest.fixture
def xtcl():
    return get_language("xtcl")


@pytest.fixture
def xptcl():
    return get_language("xptcl")


@pytest.fixture
def xcl():
    return get_language("xcl")


@pytest.fixture
def xnccl():
    return get_language("xnccl")


@pytest.fixture
def lam():
    return get_language("lambda")


@pytest.fixture
def small_probes():
    """Probe pools small enough for exhaustive observations in unit tests."""

    def build(lang, size=3, limit=3):
        return lang.probes(size, limit)

    return build
