import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scnls.errors import AssumptionError, BoundaryMassError, ResolutionError
from scnls.potential import CanonicalPotential, canonical, stark_gauge
from scnls.propagators import (
    EvolutionProblem, GeneralPotential, StepperConfig, default_dt, energy, evolve, free_gaussian, free_group,
    harmonic_cosine_potential, linear_asymptotic_solution, sigma_lower_bound, validate_sigma,
)
from scnls.spectral import GaussianProfile, WaveField, concentrate_profile, first_moment, l2_norm, make_grid

from conftest import band_limited

PI14 = math.pi ** 0.25


# --- sigma and potentials ------------------------------------------------------------


def test_sigma_bounds():
    assert sigma_lower_bound(1) == pytest.approx((1 + math.sqrt(17)) / 4)
    assert validate_sigma(1, 2.0) == []
    with pytest.raises(AssumptionError):
        validate_sigma(1, 1.0)
    with pytest.raises(AssumptionError):
        validate_sigma(2, 0.5)
    with pytest.raises(AssumptionError):
        validate_sigma(1, 1.2)
    notes = validate_sigma(1, 1.2, small_data=True)
    assert notes


def test_general_potential_origin_check():
    bad = GeneralPotential(lambda t, x: 1.0 + 0 * x[0], lambda t, x: [0 * x[0]], dim=1)
    with pytest.raises(AssumptionError):
        bad.require_zero_at_origin()
    harmonic_cosine_potential().require_zero_at_origin()


def test_general_potential_gradient_check():
    harmonic_cosine_potential().check_gradient(np.linspace(-2, 2, 5)[:, None], times=(0.0, 0.7))
    wrong = GeneralPotential(lambda t, x: x[0] ** 2, lambda t, x: [x[0]], dim=1)
    with pytest.raises(ValueError):
        wrong.check_gradient([[1.0]])


def test_default_dt():
    assert default_dt(0.1, 1.0) == pytest.approx(0.001)
    assert default_dt(1 / 32, 0.8) == pytest.approx(1 / 1600)
    assert default_dt(1.0, 5.0) == pytest.approx(0.005)


# --- free group -------------------------------------------------------------------------


def test_free_group_identity(grid1):
    u = band_limited(grid1)
    np.testing.assert_allclose(free_group(u, 0.0).data, u.data, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_free_group_law(seed, s, t):
    g = make_grid(1, 128, 10.0)
    u = band_limited(g, seed=seed)
    a = free_group(free_group(u, s), t)
    b = free_group(u, s + t)
    assert l2_norm(a - b) <= 1e-12 * l2_norm(u)


def test_free_group_matches_complex_gaussian():
    g = make_grid(1, 512, 20.0)
    u = free_group(free_gaussian(g, 0.0), 1.0)
    np.testing.assert_allclose(u.data, free_gaussian(g, 1.0).data, atol=1e-10)


def test_free_kind_matches_closed_form():
    g = make_grid(1, 512, 20.0)
    out = evolve(EvolutionProblem("free"), free_gaussian(g, 0.0), StepperConfig(dt=1e-3), 1.0)[-1]
    assert l2_norm(out - free_gaussian(g, 1.0)) <= 1e-8


# --- evolution ------------------------------------------------------------------------------


def test_linear_coherent_state_follows_cosine():
    g = make_grid(1, 256, 8.0)
    u0 = concentrate_profile(GaussianProfile(), 1.0, g, x0=[1.0])
    prob = EvolutionProblem("linear", potential=canonical([1], [1.0]), eps=1.0)
    snaps = evolve(prob, u0, StepperConfig(dt=1e-3, snapshot_times=[0.5]), 1.0)
    for s in snaps[1:]:
        assert first_moment(s)[0] == pytest.approx(math.cos(s.t), abs=1e-6)


def test_zero_scale_is_bit_identical_to_linear():
    g = make_grid(1, 512, 8.0)
    p = canonical([-1])
    u0 = concentrate_profile(GaussianProfile(), 0.125, g)
    cfg = StepperConfig(dt=0.005)
    a = evolve(EvolutionProblem("semiclassical_nls", potential=p, eps=0.125, nonlinearity_scale=0.0), u0, cfg, 0.3)
    b = evolve(EvolutionProblem("linear", potential=p, eps=0.125), u0, cfg, 0.3)
    np.testing.assert_array_equal(a[-1].data, b[-1].data)


def test_snapshots_and_direction():
    g = make_grid(1, 256, 8.0)
    u0 = concentrate_profile(GaussianProfile(), 0.25, g)
    prob = EvolutionProblem("semiclassical_nls", potential=canonical([1]), eps=0.25)
    back = evolve(prob, u0, StepperConfig(dt=0.01, snapshot_times=[0.1, -0.2, -0.5]), -0.3)
    assert [s.t for s in back] == [-0.2, -0.3]


@pytest.mark.parametrize("kind", ["semiclassical_nls", "linear", "reference_nls"])
def test_mass_conserved_per_step(kind):
    g = make_grid(1, 512, 8.0)
    eps = 1.0 if kind == "reference_nls" else 0.125
    u0 = concentrate_profile(GaussianProfile(amplitude=1.2), eps, g)
    p = None if kind == "reference_nls" else canonical([1])
    prob = EvolutionProblem(kind, potential=p, eps=eps)
    cfg = StepperConfig(dt=0.01)
    u = u0
    for _ in range(20):
        v = evolve(prob, u, cfg, u.t + 0.01)[-1]
        assert abs(v.mass - u.mass) <= 1e-12 * u0.mass
        u = v


@pytest.mark.parametrize("kind,potential", [
    ("semiclassical_nls", canonical([1])),
    ("linear", canonical([-1])),
    ("reference_nls", None),
    ("semiclassical_nls", harmonic_cosine_potential()),
])
def test_strang_second_order(kind, potential):
    g = make_grid(1, 512, 8.0)
    eps = 1.0 if kind == "reference_nls" else 0.25
    u0 = concentrate_profile(GaussianProfile(amplitude=1.0), eps, g)
    prob = EvolutionProblem(kind, potential=potential, eps=eps)
    T, dt = 0.5, 0.02
    ref = evolve(prob, u0, StepperConfig(dt=dt / 8), T)[-1]
    e1 = l2_norm(evolve(prob, u0, StepperConfig(dt=dt), T)[-1] - ref)
    e2 = l2_norm(evolve(prob, u0, StepperConfig(dt=dt / 2), T)[-1] - ref)
    # the dt/8 reference carries 1/64 of the coarse error
    assert 3.5 <= e1 / e2 <= 4.5


def test_eps_mismatch_rejected(grid1):
    u = band_limited(grid1, eps=0.5)
    with pytest.raises(ValueError):
        evolve(EvolutionProblem("linear", potential=canonical([1]), eps=0.25), u, StepperConfig(dt=0.1), 0.1)


def test_resolution_enforced():
    g = make_grid(1, 64, 8.0)
    with pytest.raises(ResolutionError):
        evolve(EvolutionProblem("linear", potential=canonical([1]), eps=0.1),
               WaveField(g, 0.1, np.zeros(64)), StepperConfig(dt=0.1), 0.1)


def test_boundary_mass_taints_or_raises():
    g = make_grid(1, 256, 4.0)
    u0 = concentrate_profile(GaussianProfile(), 1.0, g)
    prob = EvolutionProblem("free")
    out = evolve(prob, u0, StepperConfig(dt=0.05), 2.0)
    assert out[-1].tainted
    with pytest.raises(BoundaryMassError):
        evolve(prob, u0, StepperConfig(dt=0.05, strict_boundary=True), 2.0)


# --- energy ---------------------------------------------------------------------------------


def test_energy_zero_field(grid1):
    z = WaveField(grid1, 1.0, np.zeros(grid1.shape))
    assert energy(EvolutionProblem("reference_nls"), z) == 0.0


def test_energy_free_gaussian(gauss1):
    assert energy(EvolutionProblem("linear", eps=1.0), gauss1) == pytest.approx(math.sqrt(math.pi) / 4, rel=1e-12)


def test_energy_drift_second_order():
    g = make_grid(1, 1024, 8.0)
    eps = 0.125
    p = canonical([1])
    prob = EvolutionProblem("semiclassical_nls", potential=p, eps=eps)
    u0 = concentrate_profile(GaussianProfile(), eps, g)
    e0 = energy(prob, u0)
    drift = []
    for dt in (0.01, 0.005):
        snaps = evolve(prob, u0, StepperConfig(dt=dt, snapshot_times=list(np.linspace(0.1, 0.9, 9))), 1.0)
        drift.append(max(abs(energy(prob, s) - e0) for s in snaps))
    assert 3.5 <= drift[0] / drift[1] <= 4.5


# --- identities ------------------------------------------------------------------------------


def test_eps_scaling_identity():
    # semiclassical problem with V = 0 is the reference NLS seen at scale eps
    eps, t = 0.125, 0.25
    ref_grid = make_grid(1, 1024, 32.0)
    psi = evolve(EvolutionProblem("reference_nls"), concentrate_profile(GaussianProfile(), 1.0, ref_grid),
                 StepperConfig(dt=0.002), t / eps)[-1]
    g = make_grid(1, 2048, 4.0)
    u = evolve(EvolutionProblem("semiclassical_nls", potential=canonical([0]), eps=eps),
               concentrate_profile(GaussianProfile(), eps, g), StepperConfig(dt=0.002 * eps), t)[-1]
    assert l2_norm(u - concentrate_profile(psi.replace(t=0.0), eps, g)) <= 1e-6


def test_linear_asymptotic_solution_at_zero():
    g = make_grid(1, 512, 8.0)
    out = linear_asymptotic_solution(canonical([-1]), GaussianProfile(), 0.25, g, 0.0)
    np.testing.assert_array_equal(out[0].data, concentrate_profile(GaussianProfile(), 0.25, g).data)


def test_linear_asymptotic_free_scaling():
    eps, t = 0.125, 0.3
    psi = band_limited(make_grid(1, 1024, 32.0), seed=9, width=0.8, modes=3)
    g = make_grid(1, 1024, 3.0)
    u = linear_asymptotic_solution(canonical([0]), psi, eps, g, t, dt=0.001)[-1]
    ref = concentrate_profile(free_group(psi, t / eps), eps, g)
    assert l2_norm(u - ref) <= 1e-8


def test_stark_solve_matches_gauged_free_solve():
    eps, t, b = 0.125, 0.5, 1.0
    g = make_grid(1, 2048, 8.0)
    u0 = concentrate_profile(GaussianProfile(), eps, g)
    cfg = StepperConfig(dt=eps / 200)
    stark = evolve(EvolutionProblem("semiclassical_nls", potential=CanonicalPotential([0], [1.0], [b], 0.0),
                                    eps=eps), u0, cfg, t)[-1]
    free = evolve(EvolutionProblem("semiclassical_nls", potential=canonical([0]), eps=eps), u0, cfg, t)[-1]
    # the gauge removes b.x, so its inverse adds it back
    gauged = stark_gauge(free, [b], t, direction="inverse")
    assert l2_norm(stark - gauged) <= 1e-6


def test_general_path_matches_canonical():
    g = make_grid(1, 1024, 8.0)
    p = canonical([-1])
    u0 = concentrate_profile(GaussianProfile(), 0.125, g)
    cfg = StepperConfig(dt=0.002)
    a = evolve(EvolutionProblem("semiclassical_nls", potential=p, eps=0.125), u0, cfg, 0.25)[-1]
    b = evolve(EvolutionProblem("semiclassical_nls", potential=GeneralPotential.from_canonical(p), eps=0.125),
               u0, cfg, 0.25)[-1]
    assert l2_norm(a - b) <= 1e-10
