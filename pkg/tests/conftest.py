import numpy as np
import pytest

from graphrep import kernels

BACKENDS = sorted(kernels.BACKENDS)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
