"""Exact algebra of quadratic potentials.

A raw potential ``V(y) = y.A y + beta.y + gamma`` is brought to the canonical
form ``V(x) = 1/2 sum delta_j omega_j^2 x_j^2 + sum b_j x_j + c`` with
``delta_j b_j = 0`` by an orthogonal change of frame and a translation.  The
module also provides the auxiliary flows ``g_j, h_j``, the closed-form
Hamiltonian flow, and the two gauge transforms (moving frame and Stark) that
relate equivalent formulations of the evolution problem.

Coordinate indices are zero-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce as _fold

import numpy as np

from .errors import AssumptionError
from .spectral import WaveField, fourier_shift_array

#: Relative threshold (against the spectral radius) below which an eigenvalue is zero.
ZERO_EIG_REL = 1e-9
#: Largest denominator tried when testing two frequencies for a rational ratio.
RATIONAL_MAX_DEN = 1000
RATIONAL_TOL = 1e-9


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RawPotential:
    """``V(y) = y.quad y + lin.y + const_term`` with a symmetric ``quad``."""

    quad: np.ndarray
    lin: np.ndarray = None
    const_term: float = 0.0

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.quad, dtype=float))
        if q.shape[0] != q.shape[1]:
            raise ValueError(f"quad must be square, got shape {q.shape}")
        # store the symmetric part so the stored matrix is exactly symmetric
        object.__setattr__(self, "quad", _frozen(0.5 * (q + q.T)))
        n = q.shape[0]
        lin = np.zeros(n) if self.lin is None else np.asarray(self.lin, dtype=float).reshape(-1)
        if lin.shape != (n,):
            raise ValueError(f"lin must have length {n}")
        object.__setattr__(self, "lin", _frozen(lin))
        object.__setattr__(self, "const_term", float(self.const_term))

    @property
    def dim(self):
        return self.quad.shape[0]

    def __call__(self, y):
        return eval_raw(self, y)

    def to_dict(self):
        return {"quad": self.quad.tolist(), "lin": self.lin.tolist(), "const": self.const_term}


@dataclass(frozen=True, eq=False)
class CanonicalPotential:
    """Canonical quadratic potential together with the frame that produced it.

    Original coordinates ``y`` and canonical coordinates ``x`` are related by
    ``y = origin_shift + frame @ x``.  When ``delta_j == 0`` the stored
    ``omega_j`` is 1 and never used.
    """

    delta: np.ndarray
    omega: np.ndarray
    b: np.ndarray = None
    c: float = 0.0
    origin_shift: np.ndarray = None
    frame: np.ndarray = None
    diagnostics: tuple = field(default=())

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float).reshape(-1)
        n = delta.size
        if not np.all(np.isin(delta, (-1.0, 0.0, 1.0))):
            raise ValueError(f"delta entries must be -1, 0 or 1, got {delta}")
        omega = np.broadcast_to(np.asarray(self.omega, dtype=float), (n,)).copy()
        omega[delta == 0] = 1.0
        if not np.all(omega > 0):
            raise ValueError(f"omega must be positive, got {omega}")
        b = np.zeros(n) if self.b is None else np.broadcast_to(np.asarray(self.b, float), (n,))
        if np.any((delta != 0) & (b != 0)):
            raise ValueError("a linear term is only allowed where delta_j = 0")
        shift = np.zeros(n) if self.origin_shift is None else np.asarray(self.origin_shift, float)
        frame = np.eye(n) if self.frame is None else np.asarray(self.frame, float)
        if frame.shape != (n, n) or shift.shape != (n,):
            raise ValueError("frame/origin_shift have the wrong shape")
        if np.max(np.abs(frame.T @ frame - np.eye(n))) > 1e-12:
            raise ValueError("frame is not orthogonal")
        for name, val in (("delta", delta), ("omega", omega), ("b", b),
                          ("origin_shift", shift), ("frame", frame)):
            object.__setattr__(self, name, _frozen(val))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    @property
    def dim(self):
        return self.delta.size

    @property
    def curvature(self):
        """Coefficients ``delta_j omega_j^2`` of the quadratic part."""
        return self.delta * self.omega**2

    @property
    def is_free(self):
        return not np.any(self.delta) and not np.any(self.b)

    def __call__(self, x, include_c=False):
        return eval_potential(self, x, include_c)

    def to_dict(self):
        return {
            "delta": self.delta.astype(int).tolist(),
            "omega": self.omega.tolist(),
            "b": self.b.tolist(),
            "c": self.c,
            "origin_shift": self.origin_shift.tolist(),
            "frame": self.frame.tolist(),
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Classical state ``(x, xi)``."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if x.shape != xi.shape:
            raise ValueError("x and xi must have the same shape")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise ValueError("phase point must be finite")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "xi", _frozen(xi))

    @property
    def dim(self):
        return self.x.size


def _fix_sign(vecs, atol=1e-12):
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        # first index attaining the maximum magnitude, ties broken by position
        lead = int(np.nonzero(mags >= mags.max() - atol)[0][0])
        if col[lead] < 0:
            out[:, j] = -col
    return out


def reduce_potential(raw: RawPotential) -> CanonicalPotential:
    """Diagonalize and complete the square.

    Eigenvalues ``lambda_j`` of ``raw.quad`` (sorted descending) become
    ``delta_j omega_j^2 / 2``.  An eigenvalue with
    ``|lambda| <= 1e-9 * max|lambda|`` is treated as zero, its linear
    coefficient kept as ``b_j``, and a note is added to ``diagnostics``.

    Examples
    --------
    >>> p = reduce_potential(RawPotential([[0.5]], [1.0]))
    >>> p.delta.tolist(), p.c, p.origin_shift.tolist()
    ([1.0], -0.5, [-1.0])
    """
    lam, vecs = np.linalg.eigh(raw.quad)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    frame = _fix_sign(vecs[:, order])
    radius = float(np.max(np.abs(lam))) if lam.size else 0.0
    tol_zero = ZERO_EIG_REL * radius
    beta = frame.T @ raw.lin

    n = raw.dim
    delta = np.zeros(n)
    omega = np.ones(n)
    b = np.zeros(n)
    y0 = np.zeros(n)
    c = raw.const_term
    notes = []
    for j in range(n):
        if abs(lam[j]) > tol_zero:
            delta[j] = np.sign(lam[j])
            omega[j] = math.sqrt(2.0 * abs(lam[j]))
            y0[j] = -beta[j] / (2.0 * lam[j])
            c -= beta[j] ** 2 / (4.0 * lam[j])
        else:
            b[j] = beta[j]
            if lam[j] != 0.0:
                notes.append(f"eigenvalue {lam[j]:.3e} on axis {j} treated as zero (tol {tol_zero:.3e})")
    return CanonicalPotential(delta, omega, b, c, frame @ y0, frame, tuple(notes))


def canonical(delta, omega=1.0, b=None, c=0.0) -> CanonicalPotential:
    """Build a canonical potential in the identity frame."""
    return CanonicalPotential(delta, omega, b, c)


def _coord_list(x, dim):
    if isinstance(x, (list, tuple)):
        comps = [np.asarray(v, dtype=float) for v in x]
    else:
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        comps = list(arr)
    if len(comps) != dim:
        raise ValueError(f"expected {dim} coordinates, got {len(comps)}")
    return comps


def eval_potential(p: CanonicalPotential, x, include_c: bool = False):
    """``1/2 sum delta_j omega_j^2 x_j^2 + sum b_j x_j`` (plus ``c`` if asked).

    ``x`` is an ``n``-vector, an array whose leading axis indexes
    coordinates, or a sequence of broadcastable coordinate arrays.
    """
    comps = _coord_list(x, p.dim)
    total = 0.0
    for xj, k, bj in zip(comps, p.curvature, p.b):
        total = total + 0.5 * k * xj**2 + bj * xj
    if include_c:
        total = total + p.c
    return total


def potential_gradient(p: CanonicalPotential, x):
    comps = _coord_list(x, p.dim)
    return [k * xj + bj for xj, k, bj in zip(comps, p.curvature, p.b)]


def eval_raw(raw: RawPotential, y):
    """Raw form on an ``n``-vector or an array with coordinates on axis 0."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y.reshape(1)
    if y.shape[0] != raw.dim:
        raise ValueError(f"expected {raw.dim} coordinates, got {y.shape[0]}")
    quad = np.einsum("i...,ij,j...->...", y, raw.quad, y)
    return quad + np.einsum("i,i...->...", raw.lin, y) + raw.const_term


def to_canonical_coords(p: CanonicalPotential, y):
    y = np.asarray(y, dtype=float)
    return np.einsum("ji,j...->i...", p.frame, y - p.origin_shift.reshape((-1,) + (1,) * (y.ndim - 1)))


def to_original_coords(p: CanonicalPotential, x):
    x = np.asarray(x, dtype=float)
    return p.origin_shift.reshape((-1,) + (1,) * (x.ndim - 1)) + np.einsum("ij,j...->i...", p.frame, x)


# --- auxiliary flows -----------------------------------------------------------


def _gh_scalar(d, w, t):
    if d > 0:
        return np.sin(w * t) / w, np.cos(w * t)
    if d < 0:
        return np.sinh(w * t) / w, np.cosh(w * t)
    t = np.asarray(t, dtype=float)
    return t * 1.0, np.ones_like(t)


def gh(p: CanonicalPotential, j: int, t):
    """Auxiliary functions ``(g_j(t), h_j(t))``; vectorized over ``t``.

    ``g = sin(wt)/w, t, sinh(wt)/w`` and ``h = cos(wt), 1, cosh(wt)`` for
    ``delta_j = 1, 0, -1``, so that ``h^2 + delta w^2 g^2 = 1``.
    """
    if not 0 <= j < p.dim:
        raise IndexError(f"coordinate {j} out of range for dim {p.dim}")
    return _gh_scalar(p.delta[j], p.omega[j], t)


def gh_all(p: CanonicalPotential, t):
    """Arrays ``g, h`` of length ``dim`` at scalar time ``t``."""
    pairs = [gh(p, j, t) for j in range(p.dim)]
    return np.array([float(g) for g, _ in pairs]), np.array([float(h) for _, h in pairs])


def bicharacteristic(p: CanonicalPotential, start: PhasePoint, t: float) -> PhasePoint:
    """Closed-form Hamiltonian flow of ``|xi|^2/2 + V(x)`` from ``start``."""
    if start.dim != p.dim:
        raise ValueError("phase point and potential dimensions differ")
    g, h = gh_all(p, t)
    x = h * start.x + g * start.xi - 0.5 * p.b * t**2
    xi = h * start.xi - p.curvature * g * start.x - p.b * t
    return PhasePoint(x, xi)


def _check_direction(direction):
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def moving_frame_action(p, start, t):
    """Return ``(x(t), xi(t), S)`` where ``S`` maps grid coordinates to the frame phase."""
    cur = bicharacteristic(p, start, t)
    const = 0.5 * (cur.x @ cur.xi - start.x @ start.xi)

    def phase(coords):
        return sum(x * k for x, k in zip(coords, cur.xi)) - const

    return cur.x, cur.xi, phase


def moving_frame_transform(u: WaveField, p: CanonicalPotential, start: PhasePoint, t: float,
                           direction: str = "forward") -> WaveField:
    """Map a solution for origin data to a solution for data at ``start``.

    Forward: ``u(x - x(t)) exp(i S(t, x)/eps)`` with
    ``S = x.xi(t) - (x(t).xi(t) - x0.xi0)/2``.  The shift is a Fourier phase,
    exact for band-limited fields.  Requires ``b = 0``.
    """
    _check_direction(direction)
    if np.any(p.b):
        raise AssumptionError("moving-frame transform requires b = 0")
    if p.dim != u.dim or start.dim != u.dim:
        raise ValueError("field, potential and phase point dimensions differ")
    xt, _, phase = moving_frame_action(p, start, t)
    factor = np.exp(1j * phase(u.grid.coords) / u.eps)
    if direction == "forward":
        data = fourier_shift_array(u.grid, u.data, xt) * factor
    else:
        data = fourier_shift_array(u.grid, u.data * np.conj(factor), -xt)
    return u.with_data(data)


def stark_gauge(u: WaveField, b, t: float, direction: str = "forward") -> WaveField:
    """Remove (forward) or restore (inverse) a linear potential ``b.x``.

    Forward: ``u(t, x - t^2 b/2) exp(i (t b.x - t^3 |b|^2 / 3)/eps)``.  If
    ``u`` solves the problem with potential ``V`` then the result solves it
    with ``V - b.x``.
    """
    _check_direction(direction)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.size != u.dim:
        raise ValueError("b and field dimensions differ")
    if not np.any(b) or t == 0:
        return u.with_data(u.data)
    shift = 0.5 * t**2 * b
    phase = t * sum(x * bj for x, bj in zip(u.grid.coords, b)) - t**3 * float(b @ b) / 3.0
    factor = np.exp(1j * phase / u.eps)
    if direction == "forward":
        data = fourier_shift_array(u.grid, u.data, shift) * factor
    else:
        data = fourier_shift_array(u.grid, u.data * np.conj(factor), -shift)
    return u.with_data(data)


# --- structural hypotheses -----------------------------------------------------


def rational_ratio(a: float, b: float, max_den: int = RATIONAL_MAX_DEN, tol: float = RATIONAL_TOL):
    """Best rational approximation of ``a/b`` if within ``tol``, else ``None``."""
    r = a / b
    frac = Fraction(r).limit_denominator(max_den)
    return frac if abs(r - float(frac)) <= tol * max(1.0, abs(r)) else None


def is_rationally_dependent(a: float, b: float, **kw) -> bool:
    return rational_ratio(a, b, **kw) is not None


def full_refocus_time(p: CanonicalPotential):
    """First ``t > 0`` at which every ``g_j`` vanishes, or ``None``."""
    if not np.all(p.delta == 1):
        return None
    w0 = p.omega[0]
    dens = []
    for w in p.omega:
        frac = rational_ratio(w, w0)
        if frac is None:
            return None
        dens.append(frac.denominator)
    k = _fold(lambda a, b: a * b // math.gcd(a, b), dens, 1)
    return k * math.pi / w0


def validate_potential_assumption(p: CanonicalPotential, T: float = None,
                                  allow_refocus: bool = False):
    """Check the nondegeneracy hypothesis on canonical potentials.

    Requires some ``delta_j != 1``, or all ``delta_j = 1`` with at least one
    irrational frequency ratio.  The excluded isotropic case is accepted when
    ``T`` lies before the first full refocus or ``allow_refocus`` is set; a
    note is returned in that case.

    Returns
    -------
    list of str
        Notes describing any relaxation that was applied.
    """
    if np.any(p.delta * p.b):
        raise AssumptionError("delta_j b_j must vanish for every j")
    t_star = full_refocus_time(p)
    if t_star is None:
        return []
    if allow_refocus:
        return [f"fully refocusing potential accepted for a control run (refocus at t={t_star:.6g})"]
    if T is not None and abs(T) < t_star:
        return [f"fully refocusing potential accepted on |t| <= {T:.6g} < first refocus {t_star:.6g}"]
    raise AssumptionError(
        f"all delta_j = 1 with rationally dependent frequencies: full refocus at t={t_star:.6g}")
