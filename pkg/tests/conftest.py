import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from radiolith import _backend

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def gaussian_blob(sigma_b, n=128, center=64, contrast=0.6, background=0.8, dark=True):
    """Gaussian blob of standard deviation ``sigma_b`` centred on a pixel."""
    y, x = np.mgrid[0:n, 0:n]
    bump = contrast * np.exp(-((x - center) ** 2 + (y - center) ** 2) / (2.0 * sigma_b ** 2))
    return background - bump if dark else background - contrast + bump


def piecewise_phantom(n=256):
    """Piecewise-constant 8-bit phantom: background, a disk, a bar and a square."""
    y, x = np.mgrid[0:n, 0:n]
    img = np.full((n, n), 180 / 255)
    img[(x - n * 0.35) ** 2 + (y - n * 0.4) ** 2 < (n * 0.18) ** 2] = 60 / 255
    img[int(n * 0.65):int(n * 0.8), int(n * 0.1):int(n * 0.9)] = 120 / 255
    img[int(n * 0.15):int(n * 0.35), int(n * 0.65):int(n * 0.85)] = 230 / 255
    return img


def random_8bit(rng, shape):
    return rng.integers(0, 256, size=shape).astype(np.float64) / 255.0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=_backend.available())
def backend(request):
    with _backend.use_backend(request.param):
        yield request.param


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
