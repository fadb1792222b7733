import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["compiled", "python"])
def backend(request):
    from curvatura import kernels

    if request.param not in kernels.BACKENDS:
        pytest.skip(f"{request.param} backend not built")
    previous = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)
