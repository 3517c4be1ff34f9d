import pytest

from otari import _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # keep jit compilation out of individual (possibly timed) tests
    _kernels.warmup()
