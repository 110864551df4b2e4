import numpy as np
import pytest

from scnls.spectral import WaveField, make_grid


def band_limited(grid, eps=1.0, seed=0, width=1.0, modes=6):
    """Smooth random field: a Gaussian envelope times a few low Fourier modes."""
    rng = np.random.default_rng(seed)
    X = grid.coords
    r2 = sum(x**2 for x in X)
    env = np.exp(-r2 / (2 * width**2))
    poly = np.zeros(grid.shape, dtype=complex)
    for _ in range(modes):
        k = rng.normal(size=grid.dim)
        phase = sum(ki * xi for ki, xi in zip(k, X))
        poly += (rng.normal() + 1j * rng.normal()) * np.exp(1j * phase)
    return WaveField(grid, eps, env * poly)


@pytest.fixture
def grid1():
    return make_grid(1, 256, 10.0)


@pytest.fixture
def gauss1(grid1):
    x = grid1.coords[0]
    return WaveField(grid1, 1.0, np.exp(-x**2 / 2).astype(complex))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
