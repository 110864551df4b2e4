"""Periodic grids, complex wave fields, spectral calculus and norms.

Conventions
-----------
* The domain is ``[-L, L)`` per axis with ``N`` points (a power of two),
  ``x_i = -L + i*dx`` and ``dx = 2L/N``.
* FFTs are unnormalized forward and divide by ``N**n`` on the inverse
  (numpy's default ``"backward"`` normalization).
* 2D data is stored row-major with axis 0 outermost.
* In first-derivative operators the Nyquist wavenumber is set to zero, so
  that the Nyquist coefficient is treated as self-conjugate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import GridError, ResolutionError

#: Minimum number of grid points per semiclassical width is ``1/RES_FACTOR``.
RES_FACTOR = 0.25
#: Relative width of the boundary strip monitored for mass leakage.
BOUNDARY_FRACTION = 0.1
#: Mass allowed inside the boundary strip before a run is tainted.
BOUNDARY_MASS_TOL = 1e-8


def _is_power_of_two(n):
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^n`` for ``n`` in {1, 2}."""

    dim: int
    n: tuple
    L: tuple

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.n) != self.dim or len(self.L) != self.dim:
            raise GridError("n and L must have one entry per axis")
        for N in self.n:
            if not isinstance(N, (int, np.integer)) or not _is_power_of_two(int(N)):
                raise GridError(f"points per axis must be a power of two, got {N}")
        for half in self.L:
            if not half > 0:
                raise GridError(f"half-width must be positive, got {half}")

    @property
    def shape(self):
        return tuple(int(N) for N in self.n)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @cached_property
    def dx(self):
        return tuple(2.0 * half / N for half, N in zip(self.L, self.n))

    @cached_property
    def cell(self):
        """Volume element ``dx**n``."""
        return float(np.prod(self.dx))

    @cached_property
    def axes(self):
        """Grid points per axis, as 1D arrays."""
        return tuple(-half + np.arange(N) * h for half, N, h in zip(self.L, self.n, self.dx))

    @cached_property
    def coords(self):
        """Coordinate arrays broadcastable to :attr:`shape`."""
        return _broadcast_axes(self.axes)

    @cached_property
    def k_axes(self):
        """Angular wavenumbers per axis, in FFT ordering."""
        return tuple(2.0 * np.pi * np.fft.fftfreq(N, d=h) for N, h in zip(self.n, self.dx))

    @cached_property
    def kd_axes(self):
        """Wavenumbers for first derivatives (Nyquist entry zeroed)."""
        out = []
        for k, N in zip(self.k_axes, self.n):
            k = k.copy()
            k[N // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def k_max(self):
        return tuple(np.pi * N / (2.0 * half) for N, half in zip(self.n, self.L))

    @cached_property
    def ksq(self):
        """``|k|^2`` broadcast over the grid (Nyquist kept)."""
        ks = _broadcast_axes(self.k_axes)
        total = np.zeros(self.shape)
        for k in ks:
            total = total + k**2
        return total

    @cached_property
    def r2(self):
        """``|x|^2`` on the grid."""
        total = np.zeros(self.shape)
        for x in self.coords:
            total = total + x**2
        return total

    def scaled(self, factor):
        """Same point count, half-widths multiplied by ``factor``."""
        return Grid(self.dim, self.n, tuple(half * factor for half in self.L))

    def to_dict(self):
        return {"dim": self.dim, "n": list(self.shape), "L": [float(h) for h in self.L]}


def _broadcast_axes(axes):
    dim = len(axes)
    out = []
    for j, a in enumerate(axes):
        shape = [1] * dim
        shape[j] = a.size
        out.append(a.reshape(shape))
    return tuple(out)


def make_grid(dim, N, L):
    """Build a :class:`Grid`; scalars ``N`` and ``L`` are used for every axis."""
    n = tuple(int(v) for v in np.broadcast_to(np.asarray(N), (dim,)))
    if np.any(np.asarray(N) != np.asarray(N).astype(int)):
        raise GridError(f"points per axis must be integers, got {N}")
    halves = tuple(float(v) for v in np.broadcast_to(np.asarray(L, dtype=float), (dim,)))
    return Grid(dim, n, halves)


@dataclass(frozen=True, eq=False)
class WaveField:
    """A complex field on a grid at a given time, with its semiclassical ``eps``.

    The data array is copied and made read-only at construction.
    """

    grid: Grid
    eps: float
    data: np.ndarray
    t: float = 0.0
    tainted: bool = False

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        arr = np.array(self.data, dtype=np.complex128, copy=True)
        if arr.shape != self.grid.shape:
            if arr.size != self.grid.size:
                raise GridError(f"data has {arr.size} entries, grid needs {self.grid.size}")
            arr = arr.reshape(self.grid.shape)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_data(self, data, **changes):
        return dataclasses.replace(self, data=data, **changes)

    @property
    def dim(self):
        return self.grid.dim

    @property
    def mass(self):
        """``||u||_{L^2}^2`` by the periodic Riemann rule."""
        return float(self.grid.cell * np.sum(np.abs(self.data) ** 2))

    def _check(self, other):
        if not isinstance(other, WaveField):
            return NotImplemented
        if other.grid != self.grid:
            raise GridError("fields live on different grids")
        return other

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return self.with_data(self.data - other.data, tainted=self.tainted or other.tainted)

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return self.with_data(self.data + other.data, tainted=self.tainted or other.tainted)

    def __mul__(self, scalar):
        if isinstance(scalar, WaveField):
            return NotImplemented
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SigmaTriple:
    """``(||u||, ||grad||, ||moment||)``; scaling depends on how it was built."""

    l2: float
    grad: float
    moment: float

    @property
    def total(self):
        return self.l2 + self.grad + self.moment


# --- spectral calculus -------------------------------------------------------


def _k_along(grid, axis, k_axes):
    shape = [1] * grid.dim
    shape[axis] = grid.shape[axis]
    return k_axes[axis].reshape(shape)


def derivative_array(grid, data, axis):
    """Spectral derivative of a raw array along ``axis``."""
    k = _k_along(grid, axis, grid.kd_axes)
    return np.fft.ifft(1j * k * np.fft.fft(data, axis=axis), axis=axis)


def spectral_derivative(u: WaveField, axis: int) -> WaveField:
    """``d/dx_axis`` of a band-limited field (exact for modes ``|m| < N/2``)."""
    if not 0 <= axis < u.dim:
        raise IndexError(f"axis {axis} out of range for dim {u.dim}")
    return u.with_data(derivative_array(u.grid, u.data, axis))


def gradient_arrays(grid, data):
    return [derivative_array(grid, data, j) for j in range(grid.dim)]


def laplacian_array(grid, data):
    return np.fft.ifftn(-grid.ksq * np.fft.fftn(data))


def _shift_factor(k, N, a):
    # exp(-ik a); the Nyquist entry is kept real so real fields stay real.
    phase = np.exp(-1j * k * a)
    phase[N // 2] = np.cos(k[N // 2] * a)
    return phase


def fourier_shift_array(grid, data, shift):
    """Return samples of ``x -> f(x - shift)`` for band-limited periodic ``f``."""
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (grid.dim,))
    if not np.any(shift):
        return np.array(data, dtype=np.complex128)
    out = np.asarray(data, dtype=np.complex128)
    for j in range(grid.dim):
        if shift[j] == 0.0:
            continue
        fac = _shift_factor(grid.k_axes[j], grid.shape[j], shift[j])
        shape = [1] * grid.dim
        shape[j] = grid.shape[j]
        out = np.fft.ifft(np.fft.fft(out, axis=j) * fac.reshape(shape), axis=j)
    return out


def fourier_shift(u: WaveField, shift) -> WaveField:
    return u.with_data(fourier_shift_array(u.grid, u.data, shift))


def _interp_matrix_apply(data, axis, grid, points, chunk=256):
    """Evaluate the trigonometric interpolant of ``data`` along one axis."""
    N = grid.shape[axis]
    half = grid.L[axis]
    k = grid.k_axes[axis]
    coef = np.fft.fft(data, axis=axis) / N
    coef = np.moveaxis(coef, axis, 0)
    rest = coef.shape[1:]
    coef = coef.reshape(N, -1)
    points = np.asarray(points, dtype=float)
    out = np.zeros((points.size, coef.shape[1]), dtype=np.complex128)
    inside = (points >= -half) & (points < half)
    idx = np.nonzero(inside)[0]
    nyq = N // 2
    kk = k.copy()
    kk[nyq] = 0.0
    for start in range(0, idx.size, chunk):
        sel = idx[start:start + chunk]
        rel = points[sel][:, None] + half
        basis = np.exp(1j * rel * kk[None, :])
        basis[:, nyq] = np.cos(k[nyq] * rel[:, 0])
        out[sel] = basis @ coef
    out = out.reshape((points.size,) + rest)
    return np.moveaxis(out, 0, axis)


def evaluate_field(u: WaveField, axes_points: Sequence[np.ndarray]) -> np.ndarray:
    """Trigonometric interpolation of ``u`` on a tensor grid of points.

    Points outside the source domain ``[-L, L)`` evaluate to zero rather than
    to a periodic image, so a localized field can be carried onto a wider grid.
    """
    if len(axes_points) != u.dim:
        raise GridError("need one point array per axis")
    data = u.data
    for j, pts in enumerate(axes_points):
        data = _interp_matrix_apply(data, j, u.grid, pts)
    return data


def resample(u: WaveField, grid: Grid) -> WaveField:
    """Band-limited transfer of ``u`` onto another grid."""
    return WaveField(grid, u.eps, evaluate_field(u, grid.axes), t=u.t, tainted=u.tainted)


# --- norms ---------------------------------------------------------------------


def l2_norm(u: WaveField) -> float:
    return float(np.sqrt(u.grid.cell * np.sum(np.abs(u.data) ** 2)))


def lr_norm(u: WaveField, r: float) -> float:
    if np.isinf(r):
        return float(np.max(np.abs(u.data)))
    return float((u.grid.cell * np.sum(np.abs(u.data) ** r)) ** (1.0 / r))


def grad_norm(u: WaveField, scale: float = 1.0) -> float:
    """``||scale * grad u||_{L^2}``."""
    total = 0.0
    for d in gradient_arrays(u.grid, u.data):
        total += float(np.sum(np.abs(d) ** 2))
    return float(abs(scale) * np.sqrt(u.grid.cell * total))


def moment_norm(u: WaveField, scale: float = 1.0, center=None) -> float:
    """``||scale * |x - center| u||_{L^2}``."""
    if center is None:
        r2 = u.grid.r2
    else:
        center = np.broadcast_to(np.asarray(center, dtype=float), (u.dim,))
        r2 = sum((x - c) ** 2 for x, c in zip(u.grid.coords, center))
    return float(abs(scale) * np.sqrt(u.grid.cell * np.sum(r2 * np.abs(u.data) ** 2)))


def sigma_triple(u: WaveField, scaled: bool = False, center=None) -> SigmaTriple:
    """Sigma-norm components; ``scaled`` gives ``(||u||, ||eps grad u||, ||x u / eps||)``."""
    eps = u.eps if scaled else 1.0
    return SigmaTriple(l2_norm(u), grad_norm(u, eps), moment_norm(u, 1.0 / eps, center))


def sigma_norm(u: WaveField) -> float:
    return sigma_triple(u).total


def norms(u: WaveField, r_list=(), scaled: bool = False):
    """Sigma triple plus a dict of ``L^r`` norms for each ``r`` in ``r_list``."""
    return sigma_triple(u, scaled), {r: lr_norm(u, r) for r in r_list}


def first_moment(u: WaveField):
    """Center of mass ``int x |u|^2 / int |u|^2`` per axis."""
    dens = np.abs(u.data) ** 2
    m = np.sum(dens)
    return np.array([float(np.sum(x * dens) / m) for x in u.grid.coords])


def boundary_mass(u: WaveField, fraction: float = BOUNDARY_FRACTION) -> float:
    """Mass carried by points within ``fraction * L`` of the boundary."""
    mask = np.zeros(u.grid.shape, dtype=bool)
    for x, half in zip(u.grid.coords, u.grid.L):
        mask = mask | (np.abs(x) > (1.0 - fraction) * half)
    return float(u.grid.cell * np.sum(np.abs(u.data[mask]) ** 2))


# --- profiles and concentration -----------------------------------------------


@dataclass(frozen=True)
class GaussianProfile:
    """``amplitude * exp(-|y|^2 / (2 width^2))``."""

    width: float = 1.0
    amplitude: float = 1.0

    def __call__(self, coords):
        r2 = sum(np.asarray(y) ** 2 for y in coords)
        return self.amplitude * np.exp(-r2 / (2.0 * self.width**2))

    def l2_norm(self, dim):
        return float(abs(self.amplitude) * (np.pi * self.width**2) ** (dim / 4.0))

    def on_grid(self, grid, eps=1.0):
        return WaveField(grid, eps, self(grid.coords))


Profile = Union[Callable, WaveField]


def _same_nodes(src_axes, dst_axes):
    for a, b in zip(src_axes, dst_axes):
        if a.shape != b.shape or not np.allclose(a, b, rtol=0, atol=1e-12 * max(1.0, abs(a[0]))):
            return False
    return True


def check_resolution(grid: Grid, eps: float, res_factor: float = RES_FACTOR):
    for h in grid.dx:
        if h > eps * res_factor * (1 + 1e-12):
            raise ResolutionError(
                f"dx={h:.4g} exceeds eps*res_factor={eps * res_factor:.4g}; refine the grid")


def concentrate_profile(phi: Profile, eps: float, grid: Grid, x0=None, xi0=None,
                        kappa: float = 0.0, t: float = 0.0) -> WaveField:
    """Sample ``eps^{-n/2} phi((x - x0)/eps) exp(i (x.xi0 + kappa)/eps)`` on ``grid``.

    ``phi`` is either a callable on scaled coordinate arrays or a reference
    :class:`WaveField`, which is interpolated spectrally.
    """
    check_resolution(grid, eps)
    dim = grid.dim
    x0 = np.zeros(dim) if x0 is None else np.broadcast_to(np.asarray(x0, float), (dim,))
    xi0 = np.zeros(dim) if xi0 is None else np.broadcast_to(np.asarray(xi0, float), (dim,))
    scaled_axes = [(a - c) / eps for a, c in zip(grid.axes, x0)]
    if isinstance(phi, WaveField):
        if phi.dim != dim:
            raise GridError("profile and grid dimensions differ")
        if _same_nodes(phi.grid.axes, scaled_axes):
            # target nodes coincide with the profile's own nodes
            vals = phi.data
        else:
            vals = evaluate_field(phi, scaled_axes)
    else:
        vals = np.asarray(phi(_broadcast_axes(scaled_axes)), dtype=np.complex128)
        vals = np.broadcast_to(vals, grid.shape)
    phase = sum(x * k for x, k in zip(grid.coords, xi0)) + kappa
    data = eps ** (-dim / 2.0) * vals * np.exp(1j * phase / eps)
    return WaveField(grid, eps, data, t=t)
