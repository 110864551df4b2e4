import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scnls.errors import AssumptionError, BoundaryMassError, ConvergenceError
from scnls.fieldio import read_field
from scnls.scattering import (
    asymptotic_completeness_check, born_correction, load_sidecar, mass_defect, richardson, scattering_state,
)
from scnls.spectral import GaussianProfile, concentrate_profile, fourier_shift, l2_norm, make_grid, sigma_norm


def phi_on(N, L, amplitude=1.0):
    return concentrate_profile(GaussianProfile(amplitude=amplitude), 1.0, make_grid(1, N, L))


@pytest.fixture(scope="module")
def result16():
    phi = phi_on(2048, 160.0)
    return phi, scattering_state(phi, 2.0, t_ref=16.0, dt=0.01)


def test_linear_sanity_returns_datum():
    phi = phi_on(1024, 80.0)
    res = scattering_state(phi, 2.0, t_ref=8.0, dt=0.01, nonlinearity_scale=0.0)
    assert res.cauchy_tail <= 1e-10
    for psi in (res.psi_plus, res.psi_minus):
        assert sigma_norm(psi - phi) <= 1e-10


def test_small_data_matches_born_oracle():
    phi = phi_on(1024, 64.0, amplitude=0.01)
    T = 8.0
    res = scattering_state(phi, 2.0, direction=+1, t_ref=T, dt=0.005)
    corr = res.psi_plus - phi
    born = born_correction(phi, 2.0, T, direction=+1)
    assert sigma_norm(corr) < 1e-6 * sigma_norm(phi)
    assert l2_norm(corr - born) <= 1e-3 * l2_norm(born)


def test_mass_preserved(result16):
    phi, res = result16
    assert mass_defect(res, phi) <= 1e-6


def test_completeness_curve_decreases(result16):
    phi, res = result16
    curve = asymptotic_completeness_check(res, phi, 2.0, [2.0, 4.0, 8.0, 16.0])
    assert curve["monotone"]
    assert np.all(np.diff(curve["distance"]) < 0)
    assert curve["distance"][-1] <= 1e-12
    assert res.tails[1] == pytest.approx(curve["distance"][-2], rel=1e-9)


def test_completeness_linear_sanity():
    phi = phi_on(1024, 80.0)
    res = scattering_state(phi, 2.0, direction=+1, t_ref=8.0, dt=0.01, nonlinearity_scale=0.0)
    curve = asymptotic_completeness_check(res, phi, 2.0, [1.0, 2.0, 4.0, 8.0])
    assert np.max(curve["distance"]) <= 1e-10


def test_cauchy_tail_shrinks_on_refinement():
    phi = phi_on(4096, 320.0)
    res = scattering_state(phi, 2.0, t_ref=16.0, dt=0.01)
    longer = scattering_state(phi, 2.0, t_ref=32.0, dt=0.01)
    for d in (+1, -1):
        assert longer.tails[d] <= res.tails[d]


def test_translation_covariance():
    phi = phi_on(1024, 80.0)
    a = 1.5
    base = scattering_state(phi, 2.0, direction=+1, t_ref=8.0, dt=0.01)
    moved = scattering_state(fourier_shift(phi, [a]), 2.0, direction=+1, t_ref=8.0, dt=0.01)
    back = fourier_shift(moved.psi_plus, [-a])
    assert l2_norm(back - base.psi_plus) <= 1e-6


def test_non_convergence_is_reported_honestly():
    phi = phi_on(1024, 80.0)
    res = scattering_state(phi, 2.0, direction=+1, t_ref=4.0, dt=0.01, scatter_tol=1e-8)
    assert not res.converged
    with pytest.raises(ConvergenceError):
        scattering_state(phi, 2.0, direction=+1, t_ref=4.0, dt=0.01, scatter_tol=1e-8, require_converged=True)


def test_inadmissible_sigma_rejected():
    with pytest.raises(AssumptionError):
        scattering_state(phi_on(256, 20.0), 1.0, t_ref=1.0)


def test_narrow_grid_raises_boundary_error():
    with pytest.raises(BoundaryMassError):
        scattering_state(phi_on(256, 10.0), 2.0, direction=+1, t_ref=16.0, dt=0.02)


def test_save_round_trip(tmp_path, result16):
    phi, res = result16
    paths = res.save(tmp_path)
    assert len(paths) == 2
    back = read_field(paths[0])
    np.testing.assert_array_equal(back.data, res.psi_plus.data)
    side = load_sidecar(paths[0])
    assert side["converged"] == res.converged
    assert side["cauchy_tail"] == res.cauchy_tail
    assert side["t_ref"] == 16.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(1.0, 3.0))
def test_richardson_removes_leading_powers(a, c1, c2, p0):
    times = [4.0, 8.0, 16.0, 32.0]
    vals = [np.array([a + c1 * t ** -p0 + c2 * t ** -(p0 + 1)]) for t in times]
    half, full = richardson(vals, p0)
    assert full[0] == pytest.approx(a, abs=1e-10)
    assert half[0] == pytest.approx(a, abs=1e-10)


def test_extrapolation_beats_plain_pullback():
    phi = phi_on(4096, 320.0)
    plain = scattering_state(phi, 2.0, direction=+1, t_ref=32.0, dt=0.01)
    extra = scattering_state(phi, 2.0, direction=+1, t_ref=32.0, dt=0.01, extrapolation=2)
    assert extra.cauchy_tail < 0.2 * plain.cauchy_tail
