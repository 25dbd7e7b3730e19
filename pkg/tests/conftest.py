import pytest

from tapseq import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the jit kernels once so timed tests measure the algorithms
    kernels.warm_up()
