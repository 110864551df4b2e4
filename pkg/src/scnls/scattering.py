"""Scattering states of the reference NLS ``i psi_t + psi_xx/2 = |psi|^{2 sigma} psi``.

``psi_+- = lim_{t -> +-inf} U_0(-t) psi(t)`` is approximated by the pullback
at a finite time ``t_ref``.  Convergence is certified by the Sigma distance
between the pullbacks at ``t_ref/2`` and ``t_ref`` (the Cauchy tail).

The pullback error decays only like ``t^{1 - n sigma}``, which is slow for
short-range but nearly critical exponents.  With ``extrapolation=m`` the
pullbacks at ``t_ref / 2^(m+1), ..., t_ref`` are combined by Richardson
elimination of the powers ``t^{-(n sigma - 1 + i)}``, ``i < m``; the tail is
then the distance between the two finest extrapolants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundaryMassError, ConvergenceError
from .fieldio import write_field
from .propagators import EvolutionProblem, StepperConfig, evolve, free_group, validate_sigma
from .spectral import WaveField, l2_norm, sigma_norm, sigma_triple

DEFAULT_T_REF = 16.0
DEFAULT_SCATTER_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class ScatteringResult:
    """Pullback profiles and their convergence certificate.

    ``psi_minus`` or ``psi_plus`` is ``None`` when that direction was not
    requested.  ``cauchy_tail`` is the worst tail over computed directions.
    """

    psi_plus: WaveField
    psi_minus: WaveField
    sigma: float
    t_ref: float
    cauchy_tail: float
    scatter_tol: float
    tails: dict = field(default_factory=dict)
    extrapolation: int = 0
    tainted: bool = False
    nonlinearity_scale: float = 1.0
    dt: float = None

    @property
    def converged(self):
        return bool(self.cauchy_tail <= self.scatter_tol) and not self.tainted

    def profile(self, direction=+1):
        out = self.psi_plus if direction > 0 else self.psi_minus
        if out is None:
            raise ValueError(f"direction {direction:+d} was not computed")
        return out

    def sidecar(self):
        return {
            "sigma": self.sigma,
            "t_ref": self.t_ref,
            "cauchy_tail": self.cauchy_tail,
            "tails": {str(k): v for k, v in self.tails.items()},
            "scatter_tol": self.scatter_tol,
            "converged": self.converged,
            "tainted": self.tainted,
            "nonlinearity_scale": self.nonlinearity_scale,
            "dt": self.dt,
            "extrapolation": self.extrapolation,
        }

    def save(self, directory):
        """Write ``psi_plus.bin`` / ``psi_minus.bin`` with JSON sidecars."""
        directory = Path(directory)
        paths = []
        for name, psi in (("psi_plus", self.psi_plus), ("psi_minus", self.psi_minus)):
            if psi is not None:
                paths.append(write_field(directory / f"{name}.bin", psi, self.sidecar()))
        return paths


def _problem(sigma, nonlinearity_scale, small_data):
    return EvolutionProblem("reference_nls", sigma=sigma, nonlinearity_scale=nonlinearity_scale,
                            small_data=small_data)


def _pullbacks(phi, problem, times, dt):
    """``U_0(-t) psi(t)`` at each time in ``times`` (same sign)."""
    snaps = evolve(problem, phi.replace(t=0.0), StepperConfig(dt=dt, snapshot_times=times[:-1]),
                   times[-1])
    return [free_group(s, -s.t).replace(t=s.t) for s in snaps], any(s.tainted for s in snaps)


def richardson(levels, p0: float, ratio: float = 2.0):
    """Eliminate ``t^{-p0}, t^{-p0-1}, ...`` from values at geometric times.

    ``levels`` are arrays at times ``t_ref / ratio^(m), ..., t_ref``.  Returns
    the last row of the Richardson table (two entries when possible).
    """
    row = [np.asarray(v) for v in levels]
    p = p0
    while len(row) > 2:
        f = ratio**p
        row = [(f * b - a) / (f - 1.0) for a, b in zip(row, row[1:])]
        p += 1.0
    return row


def scattering_state(phi: WaveField, sigma: float, direction=(+1, -1), t_ref: float = DEFAULT_T_REF,
                     scatter_tol: float = DEFAULT_SCATTER_TOL, dt: float = None,
                     nonlinearity_scale: float = None, small_data: bool = False,
                     require_converged: bool = False, extrapolation: int = 0) -> ScatteringResult:
    """Approximate ``psi_+`` and/or ``psi_-`` from the datum ``phi`` (an ``eps = 1`` field).

    Parameters
    ----------
    direction : int or tuple of int
        ``+1``, ``-1`` or both.
    nonlinearity_scale : float, optional
        Override of the coefficient; 0 gives the linear sanity mode.
    extrapolation : int
        Number of Richardson eliminations applied to the pullbacks.

    Raises
    ------
    BoundaryMassError
        If the forward solve leaks mass into the boundary strip.
    ConvergenceError
        If ``require_converged`` and the tail exceeds ``scatter_tol``.
    """
    validate_sigma(phi.dim, sigma, small_data)
    if phi.eps != 1.0:
        raise ValueError("scattering data live on an eps = 1 grid")
    dirs = (direction,) if np.isscalar(direction) else tuple(direction)
    problem = _problem(sigma, nonlinearity_scale, small_data)
    out = {}
    tails = {}
    tainted = False
    for d in dirs:
        sgn = 1.0 if d > 0 else -1.0
        times = [sgn * t_ref / 2.0 ** (extrapolation + 1 - i) for i in range(extrapolation + 2)]
        pulls, bad = _pullbacks(phi, problem, times, dt)
        if bad:
            raise BoundaryMassError(f"boundary mass during scattering solve (direction {d:+d}); widen the grid")
        tainted |= bad
        half, full = richardson([w.data for w in pulls], phi.dim * sigma - 1.0)
        full = phi.with_data(full, t=0.0)
        tails[int(sgn)] = sigma_norm(full - phi.with_data(half))
        out[int(sgn)] = full
    res = ScatteringResult(out.get(1), out.get(-1), sigma, float(t_ref), max(tails.values()),
                           scatter_tol, tails, extrapolation=extrapolation, tainted=tainted,
                           nonlinearity_scale=problem.scale(phi.dim), dt=dt)
    if require_converged and not res.converged:
        raise ConvergenceError(f"Cauchy tail {res.cauchy_tail:.3e} exceeds {scatter_tol:.1e}")
    return res


def asymptotic_completeness_check(result: ScatteringResult, phi: WaveField, sigma: float,
                                  t_probe, direction: int = +1):
    """``||U_0(-t) psi(t) - psi_+||_Sigma`` at each probe time (sorted ascending in ``|t|``).

    Returns
    -------
    dict
        ``times``, ``distance`` (Sigma norm), ``components`` (triples) and
        ``monotone``: whether the curve decreases within 10% noise.
    """
    target = result.profile(direction)
    sgn = 1.0 if direction > 0 else -1.0
    probes = sorted(abs(float(t)) for t in t_probe)
    problem = _problem(sigma, result.nonlinearity_scale, True)
    pulls, _ = _pullbacks(phi, problem, [sgn * t for t in probes], result.dt)
    comps = [sigma_triple(w - target) for w in pulls]
    dist = np.array([c.total for c in comps])
    monotone = bool(np.all(dist[1:] <= 1.1 * dist[:-1] + 1e-14))
    return {"times": np.array(probes), "distance": dist, "components": comps, "monotone": monotone}


def born_correction(phi: WaveField, sigma: float, t_ref: float, direction: int = +1,
                    n_nodes: int = 2049) -> WaveField:
    """First Duhamel iterate of the wave operator, as an independent oracle.

    ``psi_+ - phi ~ -i int_0^{t_ref} U_0(-s) F(U_0(s) phi) ds`` with
    ``F(z) = |z|^{2 sigma} z``, by composite Simpson over ``s`` and exact free
    evolution.
    """
    if n_nodes % 2 == 0:
        n_nodes += 1
    sgn = 1.0 if direction > 0 else -1.0
    s = np.linspace(0.0, sgn * t_ref, n_nodes)
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (s[1] - s[0]) / 3.0
    grid = phi.grid
    k2 = grid.ksq
    phi_hat = np.fft.fftn(phi.data)
    acc = np.zeros(grid.shape, dtype=np.complex128)
    for sk, wk in zip(s, w):
        lin = np.fft.ifftn(np.exp(-0.5j * sk * k2) * phi_hat)
        nl = np.abs(lin) ** (2 * sigma) * lin
        acc += wk * np.exp(0.5j * sk * k2) * np.fft.fftn(nl)
    return phi.with_data(-1j * np.fft.ifftn(acc))


def load_sidecar(path):
    with open(Path(path).with_suffix(".json")) as fh:
        return json.load(fh)


def mass_defect(result: ScatteringResult, phi: WaveField) -> float:
    """Largest ``| ||psi_+-|| - ||phi|| |`` over computed directions."""
    ref = l2_norm(phi)
    return max(abs(l2_norm(p) - ref) for p in (result.psi_plus, result.psi_minus) if p is not None)
