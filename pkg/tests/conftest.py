import numpy as np
import pytest

from grazing_lab.densities import (anisotropic_gaussian, correlated_mixture,
                                   maxwellian_factorized, standard_gaussian)
from grazing_lab.kernels import default_kernel_set
from grazing_lab.quadrature import SamplerConfig


@pytest.fixture(scope="session")
def ks_maxwellian():
    """gamma = 0, nu = 0.5, kappa = 1, eps = 1, d = 2."""
    return default_kernel_set(2, gamma=0.0, nu=0.5, epsilon=1.0)


@pytest.fixture(scope="session")
def ks_hard():
    return default_kernel_set(2, gamma=1.0, nu=0.5, epsilon=1.0)


@pytest.fixture(scope="session")
def ks_d3():
    return default_kernel_set(3, gamma=0.0, nu=0.5, epsilon=1.0)


@pytest.fixture(scope="session")
def f_aniso():
    """The canonical anisotropic Gaussian: velocity covariance diag(1, 4)."""
    return anisotropic_gaussian(2)


@pytest.fixture(scope="session")
def f_maxwellian():
    return maxwellian_factorized(2)


@pytest.fixture(scope="session")
def f_standard():
    return standard_gaussian(2)


@pytest.fixture(scope="session")
def f_mixture():
    return correlated_mixture(2)


@pytest.fixture()
def cfg_small():
    return SamplerConfig(n_samples=50_000, seed=11)


@pytest.fixture()
def cfg_medium():
    return SamplerConfig(n_samples=400_000, seed=11)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
