import pytest

from finitemc.certificates import certify
from finitemc.kernels import dyadic_grid, truncate_kernel
from finitemc.mcmc import McmcConfig, run_mcmc
from finitemc.queueing import model_a, model_b, vwt_kernel
from finitemc.stationary import stationary_direct


@pytest.fixture(scope="session")
def queue_a():
    return model_a()


@pytest.fixture(scope="session")
def queue_b():
    return model_b()


@pytest.fixture(scope="session")
def kernel_a(queue_a):
    return vwt_kernel(queue_a)


@pytest.fixture(scope="session")
def kernel_b(queue_b):
    return vwt_kernel(queue_b)


@pytest.fixture(scope="session")
def finite_cache(queue_a, queue_b, kernel_a, kernel_b):
    """Memoized truncate-and-solve per (model key, level); shared across files
    because the r = 12 references are the expensive part of the suite."""
    models = {"a": (queue_a, kernel_a), "b": (queue_b, kernel_b)}
    cache = {}

    def get(key: str, r: int):
        if (key, r) not in cache:
            model, kernel = models[key]
            grid = dyadic_grid(r)
            q = truncate_kernel(kernel, grid)
            sol = stationary_direct(q, grid)
            cache[(key, r)] = (grid, q, sol)
        return cache[(key, r)]

    return get


@pytest.fixture(scope="session")
def cert_cache(finite_cache, kernel_a, kernel_b):
    """Memoized certificates per (model key, level); the J + 1 linear
    programs behind e2 dominate the cost at the larger levels."""
    kernels = {"a": kernel_a, "b": kernel_b}
    cache = {}

    def get(key: str, r: int):
        if (key, r) not in cache:
            grid, q, _ = finite_cache(key, r)
            cache[(key, r)] = certify(kernels[key], q, grid)
        return cache[(key, r)]

    return get


@pytest.fixture(scope="session")
def mcmc_cache(queue_a, queue_b):
    """Memoized simulation runs per (model key, samples, seed) at the
    default burn-in/thinning schedule."""
    models = {"a": queue_a, "b": queue_b}
    cache = {}

    def get(key: str, samples: int, seed: int):
        if (key, samples, seed) not in cache:
            cfg = McmcConfig(samples=samples, seed=seed)
            cache[(key, samples, seed)] = run_mcmc(models[key], cfg)
        return cache[(key, samples, seed)]

    return get
