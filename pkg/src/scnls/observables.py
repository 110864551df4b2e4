"""Heisenberg observables for quadratic potentials and dispersion diagnostics.

For a canonical potential the operators

    A1_j(t) = (x_j/eps) h_j + i g_j d_j - b_j t^2 / (2 eps)
    A2_j(t) = -delta_j omega_j^2 g_j x_j + i eps h_j d_j - b_j t

commute with the linear semiclassical evolution.  Away from zeros of ``g``
(resp. ``h``) they factor as a conjugated derivative, which turns the
gauge-invariant nonlinearity into a chain rule.  The module also provides
the dispersion factor ``P(t) = prod_j (|g_j| + eps |h_j|)^(1/n)``, the
modified Gagliardo-Nirenberg ratio built on it, and the time integrals of
``P^{-delta k}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularTimeError
from .potential import CanonicalPotential, eval_potential, gh, gh_all
from .spectral import WaveField, derivative_array, l2_norm, lr_norm

#: Below this magnitude of ``g_k`` (A1) or ``h_k`` (A2) the factored form is refused.
TOL_SING = 1e-6
#: Stand-in for ``r = inf`` in Lebesgue-norm diagnostics.
R_INF_SUBSTITUTE = 64.0

KINDS = ("A1", "A2")


@dataclass(frozen=True)
class ObservableSpec:
    """Which operator (``"A1"`` or ``"A2"``), along axis ``j``, at time ``t``."""

    kind: str
    j: int
    t: float
    potential: CanonicalPotential
    eps: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 <= self.j < self.potential.dim:
            raise IndexError(f"axis {self.j} out of range for dim {self.potential.dim}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def at(self, t):
        return ObservableSpec(self.kind, self.j, t, self.potential, self.eps)

    @property
    def label(self):
        return f"{self.kind}_{self.j}"


def observable_family(p: CanonicalPotential, eps: float, t: float):
    """Both kinds along every axis at time ``t``."""
    return [ObservableSpec(kind, j, t, p, eps) for kind in KINDS for j in range(p.dim)]


def _check_dims(spec, u):
    if spec.potential.dim != u.dim:
        raise ValueError(f"potential has dim {spec.potential.dim}, field has dim {u.dim}")


def apply_observable_array(spec: ObservableSpec, grid, data):
    p, j, t, eps = spec.potential, spec.j, spec.t, spec.eps
    g, h = gh(p, j, t)
    x = grid.coords[j]
    du = derivative_array(grid, data, j)
    bj = p.b[j]
    if spec.kind == "A1":
        return (x * h / eps - bj * t**2 / (2 * eps)) * data + 1j * g * du
    return (-p.curvature[j] * g * x - bj * t) * data + 1j * eps * h * du


def apply_observable(spec: ObservableSpec, u: WaveField) -> WaveField:
    """Apply ``A1_j(t)`` or ``A2_j(t)`` to ``u`` with a spectral derivative.

    Grid coordinates are taken to be the canonical coordinates of
    ``spec.potential``.
    """
    _check_dims(spec, u)
    return u.with_data(apply_observable_array(spec, u.grid, u.data))


def observable_phase(spec: ObservableSpec, coords):
    """Phase ``phi_1`` (for A1) or ``phi_2`` (for A2) on coordinate arrays.

    Raises
    ------
    SingularTimeError
        If some ``|g_k|`` (A1) or ``|h_k|`` (A2) is at most ``TOL_SING``.
    """
    p, t = spec.potential, spec.t
    g, h = gh_all(p, t)
    if spec.kind == "A1":
        bad = np.abs(g) <= TOL_SING
        if np.any(bad):
            raise SingularTimeError(f"g vanishes on axes {np.nonzero(bad)[0].tolist()} at t={t:.6g}")
        total = 0.0
        for x, gk, hk, bk in zip(coords, g, h, p.b):
            total = total + 0.5 * ((hk / gk) * x**2 - bk * t * x - t**3 * bk**2 / 12.0)
        return total
    bad = np.abs(h) <= TOL_SING
    if np.any(bad):
        raise SingularTimeError(f"h vanishes on axes {np.nonzero(bad)[0].tolist()} at t={t:.6g}")
    total = 0.0
    for x, gk, hk, kk, bk in zip(coords, g, h, p.curvature, p.b):
        total = total - 0.5 * (kk * (gk / hk) * x**2 + 2.0 * bk * t * x + t**3 * bk**2 / 3.0)
    return total


def apply_observable_factored(spec: ObservableSpec, u: WaveField) -> WaveField:
    """Conjugated-derivative form of the observable.

    ``A1 = i g e^{i phi_1/eps} d_j (e^{-i phi_1/eps} .)`` and
    ``A2 = i eps h e^{i phi_2/eps} d_j (e^{-i phi_2/eps} .)``.  The
    derivative is spectral, so the demodulated field must be resolved by the
    grid; this is the caller's responsibility.
    """
    _check_dims(spec, u)
    phase = np.exp(1j * observable_phase(spec, u.grid.coords) / spec.eps)
    g, h = gh(spec.potential, spec.j, spec.t)
    coef = 1j * g if spec.kind == "A1" else 1j * spec.eps * h
    inner = derivative_array(u.grid, np.conj(phase) * u.data, spec.j)
    return u.with_data(coef * phase * inner)


def eikonal_residual(phase: str, p: CanonicalPotential, t: float, sample_points) -> float:
    """Max of ``|d_t phi + |grad phi|^2 / 2 + V|`` over ``sample_points``.

    Derivatives are closed form, using ``g' = h`` and ``h' = -delta omega^2 g``.

    Parameters
    ----------
    phase : {"phi1", "phi2"}
    sample_points : array_like, shape (m, n)
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if pts.shape[1] != p.dim:
        raise ValueError("sample points must have one column per dimension")
    g, h = gh_all(p, t)
    dg, dh = h, -p.curvature * g
    b = p.b
    x = pts.T
    if phase == "phi1":
        if np.any(np.abs(g) <= TOL_SING):
            raise SingularTimeError(f"phi1 undefined at t={t:.6g}")
        ratio = h / g
        dratio = (dh * g - h * dg) / g**2
        col = lambda v: v[:, None]
        dt_phi = 0.5 * np.sum(col(dratio) * x**2 - col(b) * x - col(b**2) * t**2 / 4.0, axis=0)
        grad = col(ratio) * x - col(b) * t / 2.0
    elif phase == "phi2":
        if np.any(np.abs(h) <= TOL_SING):
            raise SingularTimeError(f"phi2 undefined at t={t:.6g}")
        ratio = g / h
        dratio = (dg * h - g * dh) / h**2
        col = lambda v: v[:, None]
        k = p.curvature
        dt_phi = -0.5 * np.sum(col(k * dratio) * x**2 + 2.0 * col(b) * x + col(b**2) * t**2, axis=0)
        grad = -col(k * ratio) * x - col(b) * t
    else:
        raise ValueError(f"phase must be 'phi1' or 'phi2', got {phase!r}")
    resid = dt_phi + 0.5 * np.sum(grad**2, axis=0) + eval_potential(p, x)
    return float(np.max(np.abs(resid)))


# --- dispersion ----------------------------------------------------------------


@dataclass(frozen=True)
class DispersionProfile:
    """Samples of the dispersion factor along a list of times."""

    eps: float
    potential: CanonicalPotential
    times: np.ndarray
    values: np.ndarray

    @classmethod
    def sample(cls, p, eps, times):
        times = np.asarray(times, dtype=float)
        return cls(eps, p, times, dispersion_factor(p, eps, times))


def dispersion_factor(p: CanonicalPotential, eps: float, t):
    """``prod_j (|g_j(t)| + eps |h_j(t)|)^(1/n)``; vectorized over ``t``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    for j in range(p.dim):
        g, h = gh(p, j, t)
        out = out * (np.abs(g) + eps * np.abs(h)) ** (1.0 / p.dim)
    return out if out.ndim else float(out)


def delta_r(n: int, r: float) -> float:
    """Sobolev index ``n (1/2 - 1/r)``."""
    if np.isinf(r):
        return n / 2.0
    return n * (0.5 - 1.0 / r)


def admissible_pair(n: int, r: float) -> float:
    """Time exponent ``q`` with ``2/q = delta(r)``; ``inf`` for ``r = 2``."""
    if r < 2 or (n > 2 and r >= 2 * n / (n - 2)) or (n == 2 and np.isinf(r)):
        raise ValueError(f"r={r} is not admissible in dimension {n}")
    d = delta_r(n, r)
    return np.inf if d == 0 else 2.0 / d


def modified_gn_ratio(u: WaveField, p: CanonicalPotential, t: float, r: float) -> float:
    """``||u||_r P^d / (||u||_2^{1-d} max ||A u||_2^d)`` with ``d = delta(r)``.

    The maximum runs over both observable kinds and every axis at time ``t``;
    ``r = inf`` is replaced by ``R_INF_SUBSTITUTE``.
    """
    if np.isinf(r):
        r = R_INF_SUBSTITUTE
    n = u.dim
    if n == 2 and r < 2:
        raise ValueError("r must be at least 2")
    d = delta_r(n, r)
    mass = l2_norm(u)
    if mass == 0:
        raise ValueError("zero field")
    obs = max(l2_norm(apply_observable(s, u)) for s in observable_family(p, u.eps, t))
    if obs == 0 and d > 0:
        raise ValueError("observables annihilate the field")
    pe = dispersion_factor(p, u.eps, t)
    return float(lr_norm(u, r) * pe**d / (mass ** (1 - d) * obs**d))


# --- integral bounds -----------------------------------------------------------


def _special_times(p, a, b):
    """Zeros of every ``g_j`` and ``h_j`` strictly inside ``(a, b)``."""
    nodes = []
    for d, w in zip(p.delta, p.omega):
        if d > 0:
            period = np.pi / w
            m0 = int(np.floor(a / (0.5 * period)))
            m1 = int(np.ceil(b / (0.5 * period)))
            for m in range(m0, m1 + 1):
                s = 0.5 * m * period
                if a < s < b:
                    nodes.append(s)
        elif a < 0 < b:
            nodes.append(0.0)
    return sorted(set(nodes))


def adaptive_simpson(f, nodes, rtol=1e-8, max_rounds=60):
    """Adaptive Simpson quadrature over consecutive ``nodes``.

    ``f`` must accept arrays.  Panels are refined in vectorized rounds until
    every panel meets its share of the tolerance, judged against the running
    total.  Returns ``(value, n_panels)``.
    """
    nodes = np.asarray(nodes, dtype=float)
    a, b = nodes[:-1], nodes[1:]
    total_width = float(nodes[-1] - nodes[0])
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    done = 0.0
    for _ in range(max_rounds):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        err = left + right - whole
        estimate = done + float(np.sum(left + right))
        tol = rtol * abs(estimate) * (b - a) / total_width
        ok = np.abs(err) <= 15.0 * tol
        done += float(np.sum((left + right + err / 15.0)[ok]))
        keep = ~ok
        if not np.any(keep):
            return done, None
        # split unresolved panels in two
        a, m, b = a[keep], m[keep], b[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        lm, rm, flm, frm = lm[keep], rm[keep], flm[keep], frm[keep]
        a = np.concatenate([a, m])
        b = np.concatenate([m, b])
        fa, fb = np.concatenate([fa, fm]), np.concatenate([fm, fb])
        m = np.concatenate([lm, rm])
        fm = np.concatenate([flm, frm])
        whole = np.concatenate([left[keep], right[keep]])
    raise RuntimeError("adaptive Simpson did not converge")


def lemma_p_integral(p: CanonicalPotential, eps: float, delta_exp: float, k: float,
                     lam: float, t_end: float, t_start: float = None, rtol: float = 1e-8) -> float:
    """``(int_{lam eps}^{t_end} P(t)^{-delta_exp k} dt)^{1/k}``.

    Adaptive Simpson with forced nodes at every zero of ``g_j`` and ``h_j``
    inside the interval.  ``t_start`` overrides the lower limit ``lam*eps``.
    """
    if not k > 1:
        raise ValueError("k must exceed 1")
    if not delta_exp > 0 or not delta_exp * k > 1:
        raise ValueError("need delta > 0 and delta*k > 1")
    lo = lam * eps if t_start is None else t_start
    if not lo < t_end:
        raise ValueError(f"empty interval [{lo:.6g}, {t_end:.6g}]")
    expo = delta_exp * k
    nodes = [lo, *_special_times(p, lo, t_end), t_end]
    f = lambda t: dispersion_factor(p, eps, t) ** (-expo)
    val, _ = adaptive_simpson(f, nodes, rtol=rtol)
    return float(val ** (1.0 / k))


# --- inverse relations and commutation ----------------------------------------


def inverse_observable_reconstruction(p: CanonicalPotential, eps: float, t: float,
                                      a1: WaveField, a2: WaveField, j: int, u: WaveField = None):
    """Recover ``(x_j/eps) u`` and ``i eps d_j u`` from ``A1_j u`` and ``A2_j u``.

    Uses the unimodular inverse of the coefficient matrix.  When ``b_j != 0``
    the affine correction multiplies ``u`` itself, which must then be passed.
    """
    g, h = gh(p, j, t)
    kj, bj = p.curvature[j], p.b[j]
    x_over = h * a1.data - (g / eps) * a2.data
    grad = eps * kj * g * a1.data + h * a2.data
    if bj != 0:
        if u is None:
            raise ValueError("b_j != 0: the field itself is needed for the affine terms")
        x_over = x_over + bj * (t**2 * h / (2 * eps) - t * g / eps) * u.data
        grad = grad + bj * (kj * t**2 * g / 2 + t * h) * u.data
    return a1.with_data(x_over), a1.with_data(grad)


def commutator_residual(potential, spec: ObservableSpec, u0: WaveField, t: float, dt: float) -> float:
    """Relative L2 gap between ``A(t) U(t) u0`` and ``U(t) A(0) u0``.

    ``potential`` drives the linear evolution (canonical or general), while
    the observable coefficients come from ``spec.potential``.
    """
    from .propagators import EvolutionProblem, StepperConfig, evolve

    problem = EvolutionProblem("linear", potential=potential, eps=u0.eps)
    cfg = StepperConfig(dt=dt)
    evolved = evolve(problem, u0, cfg, t)[-1]
    lhs = apply_observable(spec.at(t), evolved)
    a0u = apply_observable(spec.at(0.0), u0)
    rhs = evolve(problem, a0u, cfg, t)[-1]
    return l2_norm(lhs - rhs) / l2_norm(lhs)
