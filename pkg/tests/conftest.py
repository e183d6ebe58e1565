import pytest

from mapbench import linalg
from mapbench.rmt import MPParams, load_or_build_reference


@pytest.fixture(autouse=True)
def _residual_checks():
    # verify every eigenpair in test builds
    linalg.set_residual_checks(True)
    yield
    linalg.set_residual_checks(False)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("refcache")


@pytest.fixture(scope="session")
def reference_n8_r2(cache_dir):
    return load_or_build_reference(MPParams(8, 2), cache_dir=cache_dir)
