"""Split-step time evolution for linear and nonlinear Schrödinger problems.

All kinds share one Strang integrator::

    u <- exp(-i dt/(2 eps) (V + s |u|^{2 sigma})) u       # exact phase flow
    u <- IFFT exp(-i dt eps |k|^2 / 2) FFT u              # exact kinetic flow
    u <- exp(-i dt/(2 eps) (V + s |u|^{2 sigma})) u

where ``s`` is the nonlinearity scale of the problem kind.  The modulus is
invariant under the phase flow, so freezing ``|u|`` at the start of a
half-step is exact and every substep is unitary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AssumptionError, BoundaryMassError, SolverDivergenceError
from .potential import CanonicalPotential, eval_potential, potential_gradient
from .spectral import (
    BOUNDARY_MASS_TOL, Grid, WaveField, boundary_mass, check_resolution, concentrate_profile,
    gradient_arrays,
)

log = logging.getLogger(__name__)

KINDS = ("semiclassical_nls", "linear", "reference_nls", "free")
#: Steps between divergence / boundary checks inside an interval.
CHECK_EVERY = 64


def sigma_lower_bound(n: int) -> float:
    """Threshold ``(2 - n + sqrt(n^2 + 12 n + 4)) / (4 n)`` for a full scattering theory."""
    return (2.0 - n + math.sqrt(n * n + 12 * n + 4)) / (4.0 * n)


def validate_sigma(n: int, sigma: float, small_data: bool = False):
    """Check the nonlinearity exponent for dimension ``n`` (1 or 2).

    ``sigma > 1/2`` always; ``sigma > 1`` in 1D; for ``n <= 2`` also
    ``sigma > sigma_lower_bound(n)`` unless ``small_data`` is set, in which
    case a note is returned instead.
    """
    if n not in (1, 2):
        raise AssumptionError(f"only n = 1, 2 supported, got {n}")
    if not sigma > 0.5:
        raise AssumptionError(f"sigma={sigma} must exceed 1/2")
    if n == 1 and not sigma > 1:
        raise AssumptionError(f"sigma={sigma} must exceed 1 in one dimension")
    bound = sigma_lower_bound(n)
    if sigma > bound:
        return []
    if small_data:
        note = f"sigma={sigma} below {bound:.6f}; accepted on the small-data route"
        log.warning(note)
        return [note]
    raise AssumptionError(f"sigma={sigma} must exceed {bound:.6f} in dimension {n} (or use small data)")


@dataclass(frozen=True, eq=False)
class GeneralPotential:
    """A smooth potential ``V(t, x)`` given by callables on coordinate arrays.

    Parameters
    ----------
    value : callable ``(t, coords) -> array``
    gradient : callable ``(t, coords) -> list of arrays``
    time_dependent : bool
        When false the grid values are computed once per run.
    """

    value: Callable
    gradient: Callable
    dim: int = 1
    time_dependent: bool = True
    name: str = "general"

    def __call__(self, t, coords):
        return self.value(t, coords)

    @classmethod
    def from_canonical(cls, p: CanonicalPotential):
        return cls(lambda t, x: eval_potential(p, list(x)),
                   lambda t, x: potential_gradient(p, list(x)),
                   dim=p.dim, time_dependent=False, name="canonical")

    def check_gradient(self, points, times=(0.0,), h=1e-5, rtol=1e-5):
        """Central-difference spot check of the gradient callable."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        worst = 0.0
        for t in times:
            for pt in pts:
                coords = [np.array(v) for v in pt]
                grad = [float(gj) for gj in self.gradient(t, coords)]
                for j in range(self.dim):
                    up = [c.copy() for c in coords]
                    dn = [c.copy() for c in coords]
                    up[j] = up[j] + h
                    dn[j] = dn[j] - h
                    fd = (float(self.value(t, up)) - float(self.value(t, dn))) / (2 * h)
                    worst = max(worst, abs(fd - grad[j]) / max(1.0, abs(fd)))
        if worst > rtol:
            raise AssumptionError(f"gradient callable disagrees with finite differences ({worst:.2e})")
        return worst

    def hessian_bound(self, grid: Grid, times=(0.0,)):
        """Max absolute second difference of ``V`` on ``grid``; must be finite."""
        worst = 0.0
        for t in times:
            v = np.asarray(self.value(t, grid.coords), dtype=float)
            v = np.broadcast_to(v, grid.shape)
            for j, h in enumerate(grid.dx):
                d2 = np.diff(v, n=2, axis=j) / h**2
                worst = max(worst, float(np.max(np.abs(d2))))
        if not np.isfinite(worst):
            raise AssumptionError("potential has non-finite second differences on the grid")
        return worst

    def require_zero_at_origin(self, tol=1e-12):
        v0 = float(self.value(0.0, [np.array(0.0)] * self.dim))
        if abs(v0) > tol:
            raise AssumptionError(f"V(0,0) = {v0:.3g}, expected 0")


def harmonic_cosine_potential():
    """``V(t, x) = x^2 cos(t) / 2`` in one dimension."""
    return GeneralPotential(lambda t, x: 0.5 * x[0] ** 2 * np.cos(t),
                            lambda t, x: [x[0] * np.cos(t)], dim=1, name="half_x2_cos_t")


def polynomial_potential(quad, lin=None, const_term=0.0):
    """Degree-two polynomial ``y.A y + lin.y + const`` in original coordinates."""
    from .potential import RawPotential, eval_raw

    raw = RawPotential(quad, lin, const_term)
    A = raw.quad

    def value(t, x):
        return eval_raw(raw, np.array(np.broadcast_arrays(*[np.asarray(v, float) for v in x])))

    def gradient(t, x):
        y = np.broadcast_arrays(*[np.asarray(v, float) for v in x])
        return [sum(2.0 * A[i, j] * y[j] for j in range(raw.dim)) + raw.lin[i] for i in range(raw.dim)]

    return GeneralPotential(value, gradient, dim=raw.dim, time_dependent=False, name="polynomial")


def quartic_potential():
    """``V(x) = x^4 / 4`` in one dimension."""
    return GeneralPotential(lambda t, x: 0.25 * x[0] ** 4, lambda t, x: [x[0] ** 3],
                            dim=1, time_dependent=False, name="quartic")


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    """Equation to integrate.

    ``semiclassical_nls`` uses nonlinearity scale ``eps^{n sigma}``,
    ``reference_nls`` uses 1 with ``eps = 1``, ``linear`` and ``free`` use 0
    (``free`` also has no potential).  ``nonlinearity_scale`` overrides the
    default, e.g. 0 for a linear sanity run through the nonlinear code path.
    """

    kind: str
    potential: object = None
    sigma: float = 2.0
    eps: float = 1.0
    nonlinearity_scale: Optional[float] = None
    small_data: bool = False
    notes: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.kind in ("reference_nls", "free") and self.eps != 1.0:
            raise ValueError(f"{self.kind} is posed with eps = 1")
        if self.kind == "free" and self.potential is not None and not (
                isinstance(self.potential, CanonicalPotential) and self.potential.is_free):
            raise ValueError("free evolution takes no potential")
        if self.kind in ("linear", "free") and self.nonlinearity_scale not in (None, 0, 0.0):
            raise ValueError(f"{self.kind} has no nonlinearity")
        notes = list(self.notes)
        dim = self.dim
        if self.kind in ("semiclassical_nls", "reference_nls") and dim is not None:
            notes += validate_sigma(dim, self.sigma, self.small_data)
        object.__setattr__(self, "notes", tuple(notes))

    @property
    def dim(self):
        return None if self.potential is None else self.potential.dim

    @property
    def is_nonlinear(self):
        return self.kind in ("semiclassical_nls", "reference_nls")

    def scale(self, dim: int) -> float:
        if self.nonlinearity_scale is not None:
            return float(self.nonlinearity_scale)
        if self.kind == "semiclassical_nls":
            return float(self.eps ** (dim * self.sigma))
        if self.kind == "reference_nls":
            return 1.0
        return 0.0

    def potential_on(self, grid: Grid, t: float):
        """Grid values of the potential at time ``t`` (zero array if none)."""
        p = self.potential
        if p is None:
            return np.zeros(grid.shape)
        if isinstance(p, CanonicalPotential):
            return np.broadcast_to(eval_potential(p, list(grid.coords)), grid.shape)
        return np.broadcast_to(np.asarray(p.value(t, grid.coords), dtype=float), grid.shape)

    @property
    def time_dependent(self):
        return isinstance(self.potential, GeneralPotential) and self.potential.time_dependent


@dataclass(frozen=True)
class StepperConfig:
    """Strang stepper settings.

    Each interval between consecutive output times is split into
    ``ceil(|interval|/dt)`` equal steps, so the step actually used never
    exceeds ``dt``.
    """

    dt: Optional[float] = None
    snapshot_times: Sequence[float] = ()
    check_boundary: bool = True
    strict_boundary: bool = False

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        ts = [float(t) for t in self.snapshot_times]
        if any(b < a for a, b in zip(ts, ts[1:])) and any(b > a for a, b in zip(ts, ts[1:])):
            raise ValueError("snapshot_times must be sorted")
        object.__setattr__(self, "snapshot_times", tuple(ts))


def default_dt(eps: float, T: float) -> float:
    """``min(eps/50, 1e-3 |T|)``."""
    return min(eps / 50.0, 1e-3 * abs(T)) if T else eps / 50.0


class _Stepper:
    def __init__(self, problem: EvolutionProblem, grid: Grid, sigma_scale: float):
        self.problem = problem
        self.grid = grid
        self.scale = sigma_scale
        self.eps = problem.eps
        self.sigma = problem.sigma
        self._kin = {}
        self._vphase = {}
        self._static_v = None if problem.time_dependent else problem.potential_on(grid, 0.0)
        self.has_v = problem.potential is not None and not (
            isinstance(problem.potential, CanonicalPotential) and problem.potential.is_free)

    def kinetic(self, dt):
        fac = self._kin.get(dt)
        if fac is None:
            fac = np.exp(-1j * dt * self.eps * self.grid.ksq / 2.0)
            self._kin[dt] = fac
        return fac

    def vphase(self, half, t):
        if not self.has_v:
            return None
        if self._static_v is not None:
            fac = self._vphase.get(half)
            if fac is None:
                fac = np.exp(-1j * half / self.eps * self._static_v)
                self._vphase[half] = fac
            return fac
        return np.exp(-1j * half / self.eps * self.problem.potential_on(self.grid, t))

    def half_step(self, u, half, t_mid):
        fac = self.vphase(half, t_mid)
        if fac is not None:
            u = u * fac
        if self.scale != 0.0:
            u = u * np.exp((-1j * half / self.eps * self.scale) * np.abs(u) ** (2 * self.sigma))
        return u

    def step(self, u, t, dt):
        half = 0.5 * dt
        u = self.half_step(u, half, t + 0.25 * dt)
        u = np.fft.ifftn(self.kinetic(dt) * np.fft.fftn(u))
        return self.half_step(u, half, t + 0.75 * dt)


def evolve(problem: EvolutionProblem, u0: WaveField, config: StepperConfig = None,
           t_target: float = 1.0) -> list:
    """Integrate from ``u0.t`` to ``t_target`` with Strang splitting.

    With no potential and no nonlinearity each interval is one exact kinetic
    multiplication, so the result does not depend on ``dt``.

    Returns
    -------
    list of WaveField
        Snapshots at every ``config.snapshot_times`` entry lying between
        ``u0.t`` and ``t_target`` (inclusive of ``u0.t``), followed by the
        state at ``t_target``.  Negative direction is supported.

    Raises
    ------
    SolverDivergenceError
        If the field becomes non-finite.
    BoundaryMassError
        Only when ``config.strict_boundary``; otherwise tainting is recorded
        on the snapshots and logged.
    """
    config = config or StepperConfig()
    if problem.eps != u0.eps:
        raise ValueError(f"field eps {u0.eps} differs from problem eps {problem.eps}")
    if problem.dim is not None and problem.dim != u0.dim:
        raise ValueError("potential and field dimensions differ")
    if problem.potential is None and problem.is_nonlinear:
        validate_sigma(u0.dim, problem.sigma, problem.small_data)
    grid = u0.grid
    check_resolution(grid, u0.eps)
    t0 = float(u0.t)
    span = t_target - t0
    sign = 1.0 if span >= 0 else -1.0
    dt = config.dt if config.dt is not None else default_dt(problem.eps, span)

    outs = []
    for s in config.snapshot_times:
        if (s - t0) * sign >= 0 and (t_target - s) * sign > 0:
            outs.append(s)
    outs.append(float(t_target))

    stepper = _Stepper(problem, grid, problem.scale(u0.dim))
    data = np.array(u0.data)
    tainted = u0.tainted
    t = t0
    step_count = 0
    snaps = []
    # no potential and no nonlinearity: the kinetic multiplier is the exact flow
    exact = not stepper.has_v and stepper.scale == 0.0
    for target in outs:
        interval = target - t
        if exact:
            if interval != 0:
                data = np.fft.ifftn(stepper.kinetic(interval) * np.fft.fftn(data))
                step_count += 1
            t = target
            tainted = _check(data, grid, u0.eps, step_count, t, config) or tainted
            snaps.append(WaveField(grid, u0.eps, data, t=t, tainted=tainted))
            continue
        nsteps = int(math.ceil(abs(interval) / dt - 1e-9)) if interval != 0 else 0
        h = interval / nsteps if nsteps else 0.0
        for i in range(nsteps):
            data = stepper.step(data, t + i * h, h)
            step_count += 1
            if step_count % CHECK_EVERY == 0:
                tainted = _check(data, grid, u0.eps, step_count, t + (i + 1) * h, config) or tainted
        t = target
        tainted = _check(data, grid, u0.eps, step_count, t, config) or tainted
        snaps.append(WaveField(grid, u0.eps, data, t=t, tainted=tainted))
    return snaps


def _check(data, grid, eps, step, t, config):
    if not np.all(np.isfinite(data)):
        raise SolverDivergenceError(step, t)
    if not config.check_boundary:
        return False
    edge = boundary_mass(WaveField(grid, eps, data))
    if edge > BOUNDARY_MASS_TOL:
        msg = f"boundary mass {edge:.3e} at t={t:.6g} exceeds {BOUNDARY_MASS_TOL:.0e}"
        if config.strict_boundary:
            raise BoundaryMassError(msg)
        log.warning(msg)
        return True
    return False


def free_group(u: WaveField, t: float, eps: float = 1.0) -> WaveField:
    """Exact multiplier ``exp(i t eps Delta / 2)`` (``U_0(t)`` for ``eps = 1``)."""
    fac = np.exp(-1j * t * eps * u.grid.ksq / 2.0)
    return u.with_data(np.fft.ifftn(fac * np.fft.fftn(u.data)), t=u.t + t)


def free_gaussian(grid: Grid, t: float, width: float = 1.0, amplitude: float = 1.0,
                  eps: float = 1.0) -> WaveField:
    """Closed-form solution of ``i eps u_t + eps^2/2 u_xx = 0`` from a Gaussian.

    Initial datum ``amplitude * exp(-|x|^2 / (2 width^2))``.
    """
    s = width**2 + 1j * eps * t
    r2 = grid.r2
    data = amplitude * (width**2 / s) ** (grid.dim / 2.0) * np.exp(-r2 / (2.0 * s))
    return WaveField(grid, eps, data, t=t)


def energy(problem: EvolutionProblem, u: WaveField, t: float = 0.0) -> float:
    """``||eps grad u||^2 / 2 + s/(sigma+1) ||u||_{2 sigma + 2}^{2 sigma + 2} + int V |u|^2``."""
    grid = u.grid
    eps = problem.eps
    kin = sum(float(np.sum(np.abs(d) ** 2)) for d in gradient_arrays(grid, u.data))
    dens = np.abs(u.data) ** 2
    total = 0.5 * eps**2 * kin
    s = problem.scale(u.dim)
    if s:
        total += s / (problem.sigma + 1) * float(np.sum(dens ** (problem.sigma + 1)))
    if problem.potential is not None:
        total += float(np.sum(problem.potential_on(grid, t) * dens))
    return grid.cell * total


def linear_asymptotic_solution(p: CanonicalPotential, psi_pm, eps: float, grid: Grid, t: float,
                               dt: float = None, snapshot_times=()) -> list:
    """Concentrate ``psi_pm`` at scale ``eps`` and evolve it linearly to ``t``."""
    u0 = concentrate_profile(psi_pm, eps, grid)
    if t == 0:
        return [u0]
    problem = EvolutionProblem("linear", potential=p, eps=eps)
    return evolve(problem, u0, StepperConfig(dt=dt, snapshot_times=snapshot_times), t)


def max_safe_time(p: CanonicalPotential, grid: Grid, x_spread, xi_spread, t_max: float,
                  nsig: float = 8.0, fraction: float = 0.1, samples: int = 4001) -> float:
    """Largest ``t <= t_max`` keeping ``nsig`` phase-space widths off the boundary strip.

    The width along axis ``j`` grows like ``sqrt((h x_spread)^2 + (g xi_spread)^2)``,
    which is exact for Gaussian data under a quadratic potential.
    """
    from .potential import gh

    ts = np.linspace(0.0, t_max, samples)
    ok = np.ones_like(ts, dtype=bool)
    xs = np.broadcast_to(np.asarray(x_spread, float), (p.dim,))
    ks = np.broadcast_to(np.asarray(xi_spread, float), (p.dim,))
    for j in range(p.dim):
        g, h = gh(p, j, ts)
        width = np.sqrt((h * xs[j]) ** 2 + (g * ks[j]) ** 2)
        ok &= nsig * width + 0.5 * abs(p.b[j]) * ts**2 < (1.0 - fraction) * grid.L[j]
    if ok.all():
        return float(t_max)
    first_bad = int(np.argmin(ok))
    return float(ts[max(first_bad - 1, 0)])
