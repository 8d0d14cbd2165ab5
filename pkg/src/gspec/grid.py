"""Periodic-box discretization of R^n with a continuous-transform scaling.

Conventions
-----------
Spatial nodes per axis: ``x_j = -L/2 + j L/N``, ``j = 0..N-1``.
Frequency nodes per axis: ``xi_k = k/L``, ``k = -N/2..N/2-1`` (centered order).

The forward transform approximates ``int f(x) exp(-2 pi i x.xi) dx`` by the box
rule, so ``-Laplacian`` has symbol ``4 pi^2 |xi|^2``. Coefficient arrays are
stored in centered order. With lattice weights ``(L/N)^n`` in space and
``(1/L)^n`` in frequency the transform is unitary (Parseval holds exactly).
"""

import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft


def _workers():
    return max(1, int(os.environ.get("GSPEC_THREADS", "1")))


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L/2, L/2)^n``.

    Parameters
    ----------
    dim : int
        Spatial dimension n (1, 2 or 3).
    points : int
        Samples per axis N (even, at least 8).
    length : float
        Box side L.
    """

    dim: int
    points: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"unsupported dimension n={self.dim}; expected 1, 2 or 3")
        if int(self.points) != self.points or self.points < 8 or self.points % 2:
            raise ValueError(f"points per axis must be an even integer >= 8, got {self.points}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"box length must be positive, got {self.length}")
        object.__setattr__(self, "points", int(self.points))
        object.__setattr__(self, "length", float(self.length))

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def size(self):
        return self.points**self.dim

    @property
    def spacing(self):
        return self.length / self.points

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    @property
    def dual_volume(self):
        return self.length ** (-self.dim)

    @cached_property
    def x_axis(self):
        return -self.length / 2 + self.spacing * np.arange(self.points)

    @cached_property
    def k_axis(self):
        return np.arange(-self.points // 2, self.points // 2)

    @cached_property
    def xi_axis(self):
        return self.k_axis / self.length

    @cached_property
    def x_mesh(self):
        """Spatial coordinates, shape ``grid.shape + (n,)``."""
        m = np.stack(np.meshgrid(*([self.x_axis] * self.dim), indexing="ij"), axis=-1)
        m.flags.writeable = False
        return m

    @cached_property
    def xi_mesh(self):
        """Frequency coordinates, shape ``grid.shape + (n,)``."""
        m = np.stack(np.meshgrid(*([self.xi_axis] * self.dim), indexing="ij"), axis=-1)
        m.flags.writeable = False
        return m

    @cached_property
    def radius(self):
        r = np.linalg.norm(self.x_mesh, axis=-1)
        r.flags.writeable = False
        return r

    @cached_property
    def xi_norm(self):
        r = np.linalg.norm(self.xi_mesh, axis=-1)
        r.flags.writeable = False
        return r

    @cached_property
    def _sign(self):
        s1 = np.where(self.k_axis % 2 == 0, 1.0, -1.0)
        s = s1
        for _ in range(self.dim - 1):
            s = np.multiply.outer(s, s1)
        return s

    @property
    def origin_index(self):
        """Multi-index of x = 0 (and of xi = 0)."""
        return (self.points // 2,) * self.dim

    def refine(self, factor):
        return Grid(self.dim, self.points * factor, self.length)

    def sample(self, func):
        """Field from a callable of the coordinate mesh (last axis = components)."""
        vals = np.asarray(func(self.x_mesh), dtype=complex)
        return Field(self, np.broadcast_to(vals, self.shape))

    def zeros(self):
        return Field(self, np.zeros(self.shape, dtype=complex))


def make_grid(n, N, L):
    """Grid of dimension ``n`` with ``N`` points per axis on a box of side ``L``."""
    return Grid(n, N, L)


def _frozen(arr, shape):
    arr = np.array(arr, dtype=complex, copy=True)
    if arr.shape != shape:
        if arr.size != int(np.prod(shape)):
            raise ValueError(f"expected {int(np.prod(shape))} samples, got {arr.size}")
        arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples of a function on the spatial nodes of ``grid``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape))

    def __add__(self, other):
        return Field(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return Field(self.grid, self.values - _vals(other))

    def __mul__(self, scalar):
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def conj(self):
        return Field(self.grid, self.values.conj())

    def reflect(self):
        """The field x -> f(-x) on the lattice (periodic index map j -> N-j)."""
        return Field(self.grid, reflect_array(self.values))

    def max_abs(self):
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Transform coefficients on the frequency lattice, centered order."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs, self.grid.shape))

    def __add__(self, other):
        return SpectralField(self.grid, self.coeffs + _coeffs(other))

    def __sub__(self, other):
        return SpectralField(self.grid, self.coeffs - _coeffs(other))

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def modulus(self):
        return SpectralField(self.grid, np.abs(self.coeffs))

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2) * self.grid.dual_volume))


def _vals(f):
    return f.values if isinstance(f, Field) else f


def _coeffs(f):
    return f.coeffs if isinstance(f, SpectralField) else f


def reflect_array(a):
    """a[(N - j) mod N] along every axis: samples of f(-x)."""
    for ax in range(a.ndim):
        a = np.roll(np.flip(a, axis=ax), 1, axis=ax)
    return a


def forward_transform(f):
    """Box-rule approximation of the continuous Fourier transform."""
    g = f.grid
    raw = sfft.fftn(f.values, workers=_workers())
    coeffs = sfft.fftshift(raw) * g._sign * g.cell_volume
    return SpectralField(g, coeffs)


def inverse_transform(F):
    """Exact inverse of :func:`forward_transform`."""
    g = F.grid
    raw = sfft.ifftshift(F.coeffs * g._sign / g.cell_volume)
    return Field(g, sfft.ifftn(raw, workers=_workers()))


def lp_norm(f, p):
    """Discrete L^p norm with the box rule; ``p = inf`` gives max |f|."""
    a = np.abs(_vals(f))
    if p == np.inf or p == "inf":
        return float(a.max())
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    vol = f.grid.cell_volume
    m = a.max()
    if m == 0.0:
        return 0.0
    return float(m * (np.sum((a / m) ** p) * vol) ** (1.0 / p))


def l2_inner(f, g):
    """<f, g> = int conj(f) g, box rule."""
    return complex(np.vdot(_vals(f), _vals(g)) * f.grid.cell_volume)


def quad_form(F, sym, shift=0.0):
    """<f, (P(D) + shift) f> evaluated on the frequency lattice."""
    pv = sym.on_grid(F.grid)
    return float(np.sum((pv + shift) * np.abs(F.coeffs) ** 2) * F.grid.dual_volume)


def apply_multiplier(F, values):
    return SpectralField(F.grid, F.coeffs * values)


def nyquist_mask(grid):
    """Lattice points whose index is -N/2 along some axis."""
    mask = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[ax] = 0
        mask[tuple(idx)] = True
    return mask


def translate(F, shift):
    """Coefficients of the sampled interpolant f(x - shift).

    The Nyquist term is a cosine split over +-N/2, so on those planes the
    shift acts as the real factor cos(2 pi xi x0) instead of a phase.
    """
    g = F.grid
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (g.dim,))
    factor = np.ones(g.shape, dtype=complex)
    for ax in range(g.dim):
        arg = 2 * np.pi * g.xi_axis * shift[ax]
        f1 = np.exp(-1j * arg)
        f1[0] = np.cos(arg[0])
        shape = [1] * g.dim
        shape[ax] = g.points
        factor = factor * f1.reshape(shape)
    return SpectralField(g, F.coeffs * factor)


def padding_factor(k):
    """Per-axis zero-padding factor that removes aliasing of degree-k products."""
    return math.ceil((k + 1) / 2)


def _pad(coeffs, M):
    """Embed centered coefficients in a larger lattice.

    The unpaired Nyquist coefficient is split evenly between +-N/2 so that
    the interpolant of a real field stays real.
    """
    N = coeffs.shape[0]
    off = (M - N) // 2
    out = np.array(coeffs, dtype=complex)
    for ax in range(out.ndim):
        out = np.moveaxis(out, ax, 0)
        wide = np.zeros((N + 1,) + out.shape[1:], dtype=complex)
        wide[:N] = out
        wide[0] *= 0.5
        wide[N] = wide[0]
        out = np.moveaxis(wide, 0, ax)
    full = np.zeros((M,) * coeffs.ndim, dtype=complex)
    full[tuple(slice(off, off + N + 1) for _ in range(coeffs.ndim))] = out
    return full


def _crop(coeffs, N):
    """Restrict to the centered ``N``-lattice, averaging the +-N/2 pair.

    Averaging makes this the adjoint of :func:`_pad`, so a dealiased
    nonlinearity is exactly the gradient of the corresponding integral of
    the interpolant.
    """
    M = coeffs.shape[0]
    off = (M - N) // 2
    out = coeffs[tuple(slice(off, off + N + 1) for _ in range(coeffs.ndim))]
    for ax in range(out.ndim):
        out = np.moveaxis(out, ax, 0)
        folded = np.array(out[:N])
        folded[0] = 0.5 * (out[0] + out[N])
        out = np.moveaxis(folded, 0, ax)
    return out


def interpolate(F, factor):
    """Samples of the trigonometric interpolant on a ``factor``-times finer grid."""
    fine = F.grid.refine(factor)
    return inverse_transform(SpectralField(fine, _pad(F.coeffs, fine.points)))


def power_integral(F, q):
    """int |f|^q of the trigonometric interpolant, exact for even integer q.

    The box rule on the sample grid aliases the high modes of |f|^q; here the
    interpolant is sampled finely enough that the integral is exact.
    """
    if q != int(q) or q < 2 or int(q) % 2:
        raise ValueError(f"q must be an even integer >= 2, got {q}")
    f = interpolate(F, padding_factor(q))
    return float(np.sum(np.abs(f.values) ** q) * f.grid.cell_volume)


def dealiased_product(F, degree, func):
    """Coefficients of ``func(f)`` for a pointwise polynomial of ``degree``.

    ``f`` is evaluated on a grid refined by :func:`padding_factor` so that no
    mode of the product folds back into the retained band.
    """
    g = F.grid
    factor = padding_factor(degree)
    if factor == 1:
        return forward_transform(Field(g, func(inverse_transform(F).values)))
    f = interpolate(F, factor)
    prod = forward_transform(Field(f.grid, func(f.values)))
    return SpectralField(g, _crop(prod.coeffs, g.points))


def convolve_power(F, k):
    """Coefficients of f^k, i.e. the k-fold self-convolution of the coefficients."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)
    if k == 1:
        return F
    return dealiased_product(F, k, lambda v: v**k)


def power_nonlinearity(F, sigma):
    """Coefficients of |f|^{2 sigma} f."""
    return dealiased_product(F, 2 * sigma + 1, lambda v: (v * v.conj()) ** sigma * v)


def boundary_amplitude(f):
    """max |f| on the box faces relative to max |f| (periodization diagnostic)."""
    a = np.abs(_vals(f))
    m = a.max()
    if m == 0.0:
        return 0.0
    face = 0.0
    for ax in range(a.ndim):
        face = max(face, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(face / m)
