"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION n PASS|FAIL`` line with the measured
values and the tolerance they were judged against; the same lines are
repeated in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from scnls.harness.config import ExperimentConfig
from scnls.harness.defaults import default_config
from scnls.harness.experiments import lemma_checks, run_experiment
from scnls.harness.report import emit_reports
from scnls.observables import (
    ObservableSpec, apply_observable, apply_observable_factored, eikonal_residual,
    inverse_observable_reconstruction, observable_phase,
)
from scnls.potential import (
    CanonicalPotential, PhasePoint, RawPotential, bicharacteristic, eval_potential, eval_raw, gh,
    reduce_potential, to_canonical_coords,
)
from scnls.spectral import l2_norm, make_grid, spectral_derivative

from conftest import band_limited
from test_potential import rk4_flow

RESULTS = {}


def report(n, title, checks, elapsed, limit):
    """Record and print one line; ``checks`` holds ``(name, passed, measured, threshold)``."""
    checks = list(checks)
    if limit is not None:
        checks.append(("runtime s", elapsed < limit, round(elapsed, 1), f"< {limit}"))
    ok = all(c[1] for c in checks)
    parts = "; ".join(f"{name}={_short(m)} ({'ok' if p else 'FAIL'} vs {t})" for name, p, m, t in checks)
    line = f"CRITERION {n:>2} {'PASS' if ok else 'FAIL'} [{title}] {parts}"
    RESULTS[n] = line
    print(line)
    return ok, line


def _short(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def from_record(rec, names):
    """Pick assertions of a run record by name prefix."""
    out = []
    for a in rec.assertions:
        if any(a.name.startswith(n) for n in names):
            out.append((a.name, a.passed, a.measured, a.threshold))
    return out


@pytest.fixture(scope="module")
def runs():
    cache = {}

    def get(name, **over):
        key = (name, json.dumps(over, sort_keys=True))
        if key not in cache:
            t0 = time.perf_counter()
            rec = run_experiment(default_config(name, **over))
            cache[key] = (rec, time.perf_counter() - t0)
        return cache[key]

    return get


# --- 1 -------------------------------------------------------------------------------


def test_criterion_01_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    # Pythagorean identity
    worst_py = 0.0
    t = np.linspace(-10, 10, 1000)
    for d in (-1, 0, 1):
        for w in (0.5, 1.0, math.sqrt(2.0)):
            g, h = gh(CanonicalPotential([d], [w], None, 0.0), 0, t)
            worst_py = max(worst_py, float(np.max(np.abs(h**2 + d * w**2 * g**2 - 1) / np.maximum(1, h**2))))
    # bicharacteristic against RK4 with step 1e-4
    worst_rk = 0.0
    for _ in range(12):
        n = int(rng.integers(1, 3))
        dl = rng.choice([-1, 0, 1], size=n)
        b = np.where(dl == 0, rng.normal(size=n), 0.0)
        p = CanonicalPotential(dl, rng.choice([0.5, 1.0, math.sqrt(2.0)], size=n), b, 0.0)
        x0, xi0, tt = rng.normal(size=n), rng.normal(size=n), float(rng.uniform(-1, 1))
        out = bicharacteristic(p, PhasePoint(x0, xi0), tt)
        x, xi = rk4_flow(p, x0, xi0, tt)
        worst_rk = max(worst_rk, float(np.max(np.abs(out.x - x))), float(np.max(np.abs(out.xi - xi))))
    # reduction round trip at 100 points per random potential
    worst_red = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        A = rng.normal(size=(n, n))
        raw = RawPotential(A + A.T, rng.normal(size=n), rng.normal())
        p = reduce_potential(raw)
        for y in rng.normal(scale=3.0, size=(100, n)):
            worst_red = max(worst_red, abs(eval_potential(p, to_canonical_coords(p, y), include_c=True)
                                           - eval_raw(raw, y)))
    # direct against factored observables, and inverse reconstruction
    worst_fac = worst_inv = 0.0
    grid = make_grid(1, 512, 12.0)
    eps = 0.5
    for d, b in ((1, 0.0), (-1, 0.0), (0, 1.0), (0, 0.0)):
        p = CanonicalPotential([d], [1.0], [b], 0.0)
        u = band_limited(grid, eps=eps, seed=d + 5, width=0.7)
        for tt in (0.3, 0.9, 1.3):
            for kind in ("A1", "A2"):
                spec = ObservableSpec(kind, 0, tt, p, eps)
                a = apply_observable(spec, u)
                f = apply_observable_factored(spec, u)
                worst_fac = max(worst_fac, l2_norm(f - a) / l2_norm(a))
            a1 = apply_observable(ObservableSpec("A1", 0, tt, p, eps), u)
            a2 = apply_observable(ObservableSpec("A2", 0, tt, p, eps), u)
            xu, du = inverse_observable_reconstruction(p, eps, tt, a1, a2, 0, u=u)
            rx = u.with_data(grid.coords[0] / eps * u.data)
            rd = u.with_data(1j * eps * spectral_derivative(u, 0).data)
            worst_inv = max(worst_inv, l2_norm(xu - rx) / l2_norm(rx), l2_norm(du - rd) / l2_norm(rd))
    # eikonal residuals over a matrix of potentials and non-singular times
    worst_eik = 0.0
    pts = rng.normal(scale=2.0, size=(50, 2))
    for d1 in (-1, 0, 1):
        for d2 in (-1, 0, 1):
            b = [0.0 if d1 else 0.7, 0.0 if d2 else -1.1]
            p = CanonicalPotential([d1, d2], [1.0, math.sqrt(2.0)], b, 0.0)
            for tt in (0.3, 0.8, 2.0):
                for phase in ("phi1", "phi2"):
                    worst_eik = max(worst_eik, eikonal_residual(phase, p, tt, pts))
    elapsed = time.perf_counter() - t0
    ok, line = report(1, "algebra", [
        ("pythagorean", worst_py <= 1e-12, worst_py, 1e-12),
        ("bichar_vs_rk4", worst_rk <= 1e-8, worst_rk, 1e-8),
        ("reduce_round_trip", worst_red <= 1e-10, worst_red, 1e-10),
        ("direct_vs_factored", worst_fac <= 1e-8, worst_fac, 1e-8),
        ("eikonal", worst_eik <= 1e-9, worst_eik, 1e-9),
        ("inverse_round_trip", worst_inv <= 1e-10, worst_inv, 1e-10),
    ], elapsed, 60)
    assert ok, line


# --- 2 -------------------------------------------------------------------------------


def test_criterion_02_conservation(runs):
    rec, elapsed = runs("conservation_suite")
    checks = from_record(rec, ["relative mass drift", "energy drift", "observable-norm drift", "no boundary"])
    ok, line = report(2, "conservation", checks, elapsed, 300)
    assert ok, line


# --- 3 -------------------------------------------------------------------------------


def test_criterion_03_gauge_oracles(runs):
    t0 = time.perf_counter()
    stark, _ = runs("inside_layer", delta=[0], b=[1.0])
    frame, _ = runs("corollary_frame")
    layer, _ = runs("inside_layer")
    elapsed = time.perf_counter() - t0
    checks = from_record(stark, ["Stark gauge oracle"])
    checks += from_record(frame, ["direct vs transformed"])
    checks += from_record(layer, ["sanity: V=0 scaling"])
    ok, line = report(3, "gauge oracles", checks, elapsed, 300)
    assert ok and len(checks) == 5, line


# --- 4 -------------------------------------------------------------------------------


def test_criterion_04_inside_layer(runs):
    rec, elapsed = runs("inside_layer")
    checks = from_record(rec, ["E(eps", "no boundary"])
    ok, line = report(4, "inside layer", checks, elapsed, 900)
    assert ok, line


# --- 5 -------------------------------------------------------------------------------


def test_criterion_05_beyond_layer(runs):
    rec, elapsed = runs("beyond_layer")
    names = [a.name for a in rec.assertions]
    sanity_first = names.index("sanity: nonlinearity off, D <= 1e-5") < names.index("main: scattering state converged")
    checks = from_record(rec, ["sanity: nonlinearity off", "main: scattering", "D(", "no boundary"])
    checks.append(("sanity ran first", sanity_first, sanity_first, True))
    ok, line = report(5, "beyond layer", checks, elapsed, 1800)
    assert ok, line


# --- 6 -------------------------------------------------------------------------------


def test_criterion_06_dispersion_slopes(runs):
    rec, elapsed = runs("dispersion_suite")
    checks = from_record(rec, ["main: L^4 slope", "no boundary"])
    ok, line = report(6, "dispersion slopes", checks, elapsed, 1200)
    assert ok and len(checks) == 3, line


# --- 7 -------------------------------------------------------------------------------


def test_criterion_07_integral_bounds():
    t0 = time.perf_counter()
    checks = [(name, passed, measured, threshold) for name, passed, measured, threshold, _ in lemma_checks()]
    ok, line = report(7, "integral bounds", checks, time.perf_counter() - t0, 60)
    assert ok, line


# --- 8 -------------------------------------------------------------------------------


def test_criterion_08_rigidity(runs):
    rec, elapsed = runs("rigidity_demo")
    checks = from_record(rec, ["quadratic residual", "quartic residual"])
    ok, line = report(8, "rigidity", checks, elapsed, 300)
    assert ok, line


# --- 9 -------------------------------------------------------------------------------


def test_criterion_09_general_subquadratic(runs):
    rec, elapsed = runs("general_subquadratic")
    checks = from_record(rec, ["general path", "E(eps) strictly", "no boundary"])
    ok, line = report(9, "general subquadratic", checks, elapsed, 900)
    assert ok, line


# --- 10 ------------------------------------------------------------------------------


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    # the V = 0 sanity configuration, with the nonlinear run on top
    cfg = default_config("inside_layer", delta=[0])
    dirs = []
    for i in range(2):
        rec = run_experiment(ExperimentConfig.from_json(cfg.to_json()))
        dirs.append(emit_reports(rec, tmp_path / f"run{i}", cfg.to_dict(), plots=False))
    a, b = dirs
    same_csv = (a / "table.csv").read_bytes() == (b / "table.csv").read_bytes()
    bins = sorted(p.name for p in (a / "fields").glob("*.bin"))
    same_bin = bool(bins) and all((a / "fields" / n).read_bytes() == (b / "fields" / n).read_bytes() for n in bins)
    ok, line = report(10, "determinism", [
        ("csv byte-identical", same_csv, same_csv, True),
        (f"{len(bins)} field files byte-identical", same_bin, same_bin, True),
    ], time.perf_counter() - t0, None)
    assert ok, line
