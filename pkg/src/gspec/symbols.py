"""Fourier multipliers p(xi) and on-lattice checks of their structural bounds.

Every symbol is written in the ``exp(-2 pi i x.xi)`` convention, so the
Laplacian ``-Delta`` has symbol ``4 pi^2 |xi|^2``.

The bound checks only ever look at the finite frequency lattice of a grid;
their verdicts mean "verified on this grid", nothing more.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2 * math.pi
DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Symbol:
    """A real Fourier multiplier of order ``order_2s`` (= 2s).

    ``evaluator`` maps an array of frequencies with the components on the
    last axis to the (real) symbol values. Polynomial symbols also carry
    ``coefficients``: a map from multi-index to coefficient of ``xi^alpha``,
    which lets them be evaluated at complex frequencies.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    order_2s: float
    is_even: bool
    is_polynomial: bool = False
    coefficients: Optional[dict] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.order_2s >= 0:
            raise ValueError(f"order must be nonnegative, got {self.order_2s}")
        if self.is_polynomial and not self.coefficients:
            raise ValueError("polynomial symbol needs a coefficient map")

    @property
    def s(self):
        return self.order_2s / 2

    def __call__(self, xi):
        return self.evaluator(np.asarray(xi, dtype=float))

    def on_grid(self, grid):
        """Symbol values on the frequency lattice (cached, read-only)."""
        vals = self._cache.get(grid)
        if vals is None:
            vals = np.asarray(self(grid.xi_mesh), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"symbol {self.name} is not finite on the lattice")
            vals.flags.writeable = False
            self._cache[grid] = vals
        return vals

    def evaluate_complex(self, z):
        """p at complex frequencies (components on the last axis); polynomials only."""
        if not self.is_polynomial:
            raise ValueError(f"symbol {self.name} has no polynomial coefficient map")
        return eval_polynomial(self.coefficients, z)


def eval_polynomial(coefficients, z):
    z = np.asarray(z)
    out = np.zeros(z.shape[:-1], dtype=np.result_type(z.dtype, float))
    for alpha, c in coefficients.items():
        term = np.full(z.shape[:-1], c, dtype=out.dtype)
        for d, a in enumerate(alpha):
            if a:
                term = term * z[..., d] ** a
        out = out + term
    return out


def radial_power_terms(m, dim, scale=1.0):
    """Monomial expansion of ``scale * |xi|^{2m}`` in ``dim`` variables."""
    terms = {}
    for combo in itertools.combinations_with_replacement(range(dim), m):
        counts = [combo.count(d) for d in range(dim)]
        mult = math.factorial(m)
        for c in counts:
            mult //= math.factorial(c)
        alpha = tuple(2 * c for c in counts)
        terms[alpha] = terms.get(alpha, 0.0) + scale * mult
    return terms


def _add_terms(*maps):
    out = {}
    for m in maps:
        for k, v in m.items():
            out[k] = out.get(k, 0.0) + v
    return {k: v for k, v in out.items() if v != 0.0}


def _sq(xi):
    return np.sum(xi * xi, axis=-1)


def fractional_laplacian(s, dim=1):
    """(4 pi^2 |xi|^2)^s."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    coeffs = None
    if float(s).is_integer():
        coeffs = radial_power_terms(int(s), dim, (4 * math.pi**2) ** s)
    return Symbol(
        lambda xi: (4 * math.pi**2 * _sq(xi)) ** s,
        order_2s=2 * s,
        is_even=True,
        is_polynomial=coeffs is not None,
        coefficients=coeffs,
        name="fractional_laplacian",
        params={"s": s, "dim": dim},
    )


def bessel(s, dim=1):
    """(1 + 4 pi^2 |xi|^2)^s."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    coeffs = None
    if float(s).is_integer():
        coeffs = _add_terms(
            *(
                radial_power_terms(j, dim, math.comb(int(s), j) * (4 * math.pi**2) ** j)
                for j in range(int(s) + 1)
            )
        )
    return Symbol(
        lambda xi: (1 + 4 * math.pi**2 * _sq(xi)) ** s,
        order_2s=2 * s,
        is_even=True,
        is_polynomial=coeffs is not None,
        coefficients=coeffs,
        name="bessel",
        params={"s": s, "dim": dim},
    )


def bilaplacian(mu, dim=1):
    """Symbol of Delta^2 - mu Delta: 16 pi^4 |xi|^4 + 4 pi^2 mu |xi|^2."""
    coeffs = _add_terms(
        radial_power_terms(2, dim, 16 * math.pi**4),
        radial_power_terms(1, dim, 4 * math.pi**2 * mu),
    )
    return Symbol(
        lambda xi: 16 * math.pi**4 * _sq(xi) ** 2 + 4 * math.pi**2 * mu * _sq(xi),
        order_2s=4.0,
        is_even=True,
        is_polynomial=True,
        coefficients=coeffs,
        name="bilaplacian",
        params={"mu": mu, "dim": dim},
    )


def polynomial(terms, name="polynomial"):
    """Polynomial symbol sum_alpha c_alpha xi^alpha from (multi-index, coeff) pairs.

    The order is the total degree; the symbol is even when every monomial has
    even total degree.
    """
    items = terms.items() if isinstance(terms, dict) else terms
    coeffs = {}
    for alpha, c in items:
        alpha = tuple(int(a) for a in alpha)
        if any(a < 0 for a in alpha):
            raise ValueError(f"negative exponent in multi-index {alpha}")
        c = float(c)
        if not math.isfinite(c):
            raise ValueError(f"non-finite coefficient for {alpha}")
        coeffs[alpha] = coeffs.get(alpha, 0.0) + c
    coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
    if not coeffs:
        raise ValueError("polynomial symbol has no nonzero terms")
    dims = {len(a) for a in coeffs}
    if len(dims) != 1:
        raise ValueError("multi-indices must all have the same length")
    degree = max(sum(a) for a in coeffs)
    even = all(sum(a) % 2 == 0 for a in coeffs)
    return Symbol(
        lambda xi: np.real(eval_polynomial(coeffs, xi)),
        order_2s=float(degree),
        is_even=even,
        is_polynomial=True,
        coefficients=coeffs,
        name=name,
        params={"terms": [[list(a), c] for a, c in sorted(coeffs.items())]},
    )


def boosted_halfwave(v):
    """2 pi |xi| - 2 pi v.xi (half-wave operator with a Galilean boost, s = 1/2)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.linalg.norm(v) < 1:
        raise ValueError(f"boost speed |v| must be < 1, got {np.linalg.norm(v)}")
    return Symbol(
        lambda xi: TWO_PI * np.sqrt(_sq(xi)) - TWO_PI * (xi @ v),
        order_2s=1.0,
        is_even=bool(np.all(v == 0)),
        name="boosted_halfwave",
        params={"v": v.tolist()},
    )


_BUILTINS = {
    "fractional_laplacian": fractional_laplacian,
    "bessel": bessel,
    "bilaplacian": bilaplacian,
    "polynomial": polynomial,
    "boosted_halfwave": boosted_halfwave,
}


def builtin_symbol(kind, **params):
    """Construct a named symbol, e.g. ``builtin_symbol("bessel", s=1)``."""
    try:
        ctor = _BUILTINS[kind]
    except KeyError:
        raise ValueError(f"unknown symbol {kind!r}; known: {sorted(_BUILTINS)}") from None
    try:
        return ctor(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None


@dataclass
class AssumptionReport:
    """On-lattice fit of the growth bounds of a symbol.

    ``a_lower * |xi|^{2s} + c_offset <= p <= a_upper * |xi|^{2s}`` is fitted
    away from the origin; the ellipticity constant/radius pair says that
    ``p >= ellipticity_c |xi|^{2s}`` for all lattice points with
    ``|xi| > ellipticity_R``.
    """

    a_lower: float
    a_upper: float
    c_offset: float
    bounds_ok: bool
    ellipticity_ok: bool
    ellipticity_c: float
    ellipticity_R: float
    even_ok: bool
    even_defect: float
    min_p: float
    tol: float = DEFAULT_TOL
    sector: list = field(default_factory=list)


def _evenness_defect(sym, grid):
    pv = sym.on_grid(grid)
    mirrored = np.asarray(sym(-np.asarray(grid.xi_mesh)), dtype=float)
    scale = max(np.max(np.abs(pv)), np.finfo(float).tiny)
    return float(np.max(np.abs(pv - mirrored)) / scale)


def check_assumptions(sym, grid, tol=DEFAULT_TOL):
    """Fit the growth envelopes of ``sym`` on the lattice of ``grid``.

    The neighbourhood ``|xi| < 2/L`` is excluded from the ratio
    ``p / |xi|^{2s}``. The upper constant is the largest ratio; the lower one
    is the smallest ratio on the outer shell ``|xi| >= xi_max/2``, which
    measures growth rather than low-frequency behaviour.
    """
    pv = sym.on_grid(grid)
    r = grid.xi_norm
    two_s = sym.order_2s
    away = r >= 2.0 / grid.length
    rs = r**two_s
    ratio = pv[away] / rs[away]
    a_upper = float(ratio.max())
    r_max = grid.points / (2 * grid.length)
    tail = r[away] >= r_max / 2
    a_lower = float(ratio[tail].min())
    c_offset = float(np.min(pv - a_lower * rs))
    bounds_ok = bool(a_lower > 0 and np.isfinite(a_upper))

    ell_c = a_lower / 2
    bad = (pv < ell_c * rs) & (r > 0)
    ell_R = float(r[bad].max()) if bad.any() else float(r[r > 0].min())
    ellipticity_ok = bool(a_lower > 0 and ell_R < r_max / 2)

    even_defect = _evenness_defect(sym, grid)
    return AssumptionReport(
        a_lower=a_lower,
        a_upper=a_upper,
        c_offset=c_offset,
        bounds_ok=bounds_ok,
        ellipticity_ok=ellipticity_ok,
        ellipticity_c=float(ell_c),
        ellipticity_R=ell_R,
        even_ok=bool(even_defect <= tol),
        even_defect=even_defect,
        min_p=float(pv.min()),
        tol=tol,
    )


@dataclass
class SectorVerdict:
    """Fitted constants of the complex-shift conditions for one shift kappa."""

    kappa: list
    gamma: float
    theta: float
    a1: float
    a2: float
    b1: float
    b2: float
    sector_ok: bool
    sandwich_ok: bool

    @property
    def ok(self):
        return self.sector_ok and self.sandwich_ok


def check_sector(sym, kappa, grid, order_2s=None, delta=None, tol=DEFAULT_TOL):
    """Check the sector and real-part sandwich conditions of ``p(xi + kappa)``.

    ``p(xi + kappa)`` is evaluated exactly from the coefficient map. The
    vertex ``gamma`` sits one unit left of the smallest real part, ``theta``
    is the widest argument of ``p(xi + kappa) - gamma`` on the lattice. The
    real part is regressed on ``|xi|^{2s}``; the slope gives ``a1 = a2`` and the
    offsets ``b1, b2`` are the extreme deviations.
    """
    if not sym.is_polynomial:
        raise ValueError(f"sector check needs a polynomial symbol, got {sym.name}")
    kappa = np.broadcast_to(np.asarray(kappa, dtype=complex), (grid.dim,))
    if delta is not None and not np.linalg.norm(kappa.imag) < delta:
        raise ValueError(f"|Im kappa| = {np.linalg.norm(kappa.imag)} is outside the strip {delta}")
    two_s = sym.order_2s if order_2s is None else order_2s
    z = sym.evaluate_complex(np.asarray(grid.xi_mesh) + kappa).ravel()
    gamma = float(z.real.min() - 1.0)
    theta = float(np.max(np.abs(np.angle(z - gamma))))

    rs = (np.asarray(grid.xi_norm).ravel()) ** two_s
    design = np.stack([rs, np.ones_like(rs)], axis=1)
    (a, _), *_ = np.linalg.lstsq(design, z.real, rcond=None)
    b1 = float(np.max(a * rs - z.real))
    b2 = float(np.max(z.real - a * rs))
    return SectorVerdict(
        kappa=[complex(k) for k in kappa],
        gamma=gamma,
        theta=theta,
        a1=float(a),
        a2=float(a),
        b1=b1,
        b2=b2,
        sector_ok=bool(theta < math.pi / 2 - tol),
        sandwich_ok=bool(a > 0),
    )
