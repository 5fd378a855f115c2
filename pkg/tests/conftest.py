import pytest

from compresspp import KernelSpec, PointSeq, SeedPath


@pytest.fixture
def kernel():
    return KernelSpec(bandwidth_sq=2.0)


@pytest.fixture
def kernel_d2():
    return KernelSpec(bandwidth_sq=4.0)


def gaussian_points(n, d, seed):
    return PointSeq(SeedPath(seed).generator().standard_normal((n, d)))


@pytest.fixture
def gauss_points():
    return gaussian_points
