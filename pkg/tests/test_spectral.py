import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scnls.errors import GridError, ResolutionError
from scnls.fieldio import field_from_bytes, field_to_bytes, read_field, write_field
from scnls.spectral import (
    GaussianProfile, WaveField, boundary_mass, check_resolution, concentrate_profile, fourier_shift,
    grad_norm, l2_norm, laplacian_array, lr_norm, make_grid, moment_norm, resample, sigma_triple,
    spectral_derivative,
)

from conftest import band_limited

PI14 = math.pi ** 0.25


def test_grid_points_1d():
    g = make_grid(1, 8, 4)
    np.testing.assert_array_equal(g.axes[0], np.arange(-4.0, 4.0))
    assert g.dx == (1.0,)


def test_grid_2d_size():
    g = make_grid(2, 4, 2)
    assert g.size == 16
    assert g.dx == (1.0, 1.0)


def test_grid_rejects_non_power_of_two():
    with pytest.raises(GridError):
        make_grid(1, 7, 4)


def test_derivative_of_trig_mode():
    g = make_grid(1, 64, 4)
    x = g.coords[0]
    u = WaveField(g, 1.0, np.sin(np.pi * x / 4))
    du = spectral_derivative(u, 0)
    np.testing.assert_allclose(du.data, np.pi / 4 * np.cos(np.pi * x / 4), atol=1e-12)


def test_derivative_of_constant_is_zero(grid1):
    u = WaveField(grid1, 1.0, np.full(grid1.shape, 2.5 + 1j))
    assert np.max(np.abs(spectral_derivative(u, 0).data)) < 1e-12


def test_derivative_of_gaussian(gauss1):
    x = gauss1.grid.coords[0]
    du = spectral_derivative(gauss1, 0)
    np.testing.assert_allclose(du.data, -x * np.exp(-x**2 / 2), atol=1e-10)


def test_gaussian_norms(gauss1):
    s = sigma_triple(gauss1)
    assert s.l2 == pytest.approx(PI14, abs=1e-12)
    assert s.grad == pytest.approx(PI14 / math.sqrt(2), abs=1e-12)
    assert s.moment == pytest.approx(PI14 / math.sqrt(2), abs=1e-12)


def test_zero_field_norms(grid1):
    z = WaveField(grid1, 1.0, np.zeros(grid1.shape))
    assert sigma_triple(z).total == 0.0
    assert lr_norm(z, 4) == 0.0


def test_homogeneity(gauss1):
    two = gauss1 * 2.0
    a, b = sigma_triple(gauss1), sigma_triple(two)
    for x, y in zip((a.l2, a.grad, a.moment), (b.l2, b.grad, b.moment)):
        assert y == pytest.approx(2 * x, rel=1e-14)
    for r in (2, 4, 6, np.inf):
        assert lr_norm(two, r) == pytest.approx(2 * lr_norm(gauss1, r), rel=1e-14)


def test_concentrate_identity_at_eps_one(grid1, gauss1):
    u = concentrate_profile(GaussianProfile(), 1.0, grid1)
    np.testing.assert_allclose(u.data, gauss1.data, atol=1e-15)


def test_concentrated_l2_matches_gaussian_oracle():
    g = make_grid(1, 4096, 8)
    u = concentrate_profile(GaussianProfile(), 1 / 16, g)
    assert l2_norm(u) == pytest.approx(PI14, abs=1e-8)


def test_resolution_check():
    with pytest.raises(ResolutionError):
        check_resolution(make_grid(1, 256, 8), 1 / 32)


@pytest.mark.parametrize("eps", [0.5, 0.25, 0.125, 1 / 16])
def test_concentration_is_isometry(eps):
    g = make_grid(1, 2048, 8)
    u = concentrate_profile(GaussianProfile(), eps, g, x0=[0.3], xi0=[-0.7])
    assert l2_norm(u) == pytest.approx(PI14, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_parseval(seed, dim):
    g = make_grid(dim, 64 if dim == 1 else 32, 6.0)
    u = band_limited(g, seed=seed)
    direct = np.sum(np.abs(u.data) ** 2) * np.prod(g.dx)
    spec = np.sum(np.abs(np.fft.fftn(u.data)) ** 2) / g.size * np.prod(g.dx)
    assert direct == pytest.approx(spec, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_double_derivative_is_laplacian(seed):
    # differs only in the Nyquist row, so use a grid where it carries no mass
    g = make_grid(2, 64, 8.0)
    u = band_limited(g, seed=seed)
    lap = sum(spectral_derivative(spectral_derivative(u, a), a).data for a in range(2))
    ref = laplacian_array(g, u.data)
    scale = np.max(np.abs(ref))
    assert np.max(np.abs(lap - ref)) <= 1e-10 * scale


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-2.0, 2.0))
def test_norms_invariant_under_fourier_translation(seed, shift):
    g = make_grid(1, 256, 12.0)
    u = band_limited(g, seed=seed, width=0.8)
    v = fourier_shift(u, [shift])
    assert l2_norm(v) == pytest.approx(l2_norm(u), rel=1e-10)
    assert grad_norm(v) == pytest.approx(grad_norm(u), rel=1e-10)
    assert moment_norm(v, center=[shift]) == pytest.approx(moment_norm(u), rel=1e-10)
    assert lr_norm(v, 4) == pytest.approx(lr_norm(u, 4), rel=1e-6)


def test_fourier_shift_matches_exact_translation(grid1, gauss1):
    v = fourier_shift(gauss1, [1.5])
    x = grid1.coords[0]
    np.testing.assert_allclose(v.data, np.exp(-(x - 1.5) ** 2 / 2), atol=1e-12)


def test_resample_is_exact_for_band_limited(gauss1):
    fine = make_grid(1, 1024, 20.0)
    v = resample(gauss1, fine)
    x = fine.coords[0]
    inside = np.abs(x) < 9.0
    np.testing.assert_allclose(v.data[inside], np.exp(-x[inside] ** 2 / 2), atol=1e-10)


def test_boundary_mass_detects_edge(grid1):
    x = grid1.coords[0]
    centered = WaveField(grid1, 1.0, np.exp(-x**2 / 2))
    edge = WaveField(grid1, 1.0, np.exp(-(x - 9.5) ** 2 / 2))
    assert boundary_mass(centered) < 1e-8
    assert boundary_mass(edge) > 1e-3


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]), st.floats(0.1, 1.0), st.floats(-3, 3))
def test_field_bytes_round_trip(seed, dim, eps, t):
    g = make_grid(dim, 32, 3.0)
    u = band_limited(g, eps=eps, seed=seed).replace(t=t)
    v = field_from_bytes(field_to_bytes(u))
    assert v.grid == u.grid and v.eps == u.eps and v.t == u.t
    np.testing.assert_array_equal(v.data, u.data)
    assert field_to_bytes(v) == field_to_bytes(u)


def test_field_file_header_layout(tmp_path, grid1, gauss1):
    path = write_field(tmp_path / "g.bin", gauss1.replace(t=0.25), {"note": "x"})
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    np.testing.assert_array_equal(raw[:5], [1, 256, 10.0, 1.0, 0.25])
    np.testing.assert_array_equal(raw[5::2], gauss1.data.real)
    assert (tmp_path / "g.json").exists()
    assert read_field(path).t == 0.25
