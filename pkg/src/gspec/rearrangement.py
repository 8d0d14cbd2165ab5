"""Fourier-modulus rearrangement and majorant machinery.

``bullet(f)`` replaces the transform of ``f`` by its modulus. The helpers here
measure what that operation preserves (L^2 norm, quadratic forms), what it
can only increase (even L^p norms), and how to recognise the equality case
(transform phase affine in the frequency).
"""

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi
import scipy.signal as ssig

from . import kernels
from .grid import Field, SpectralField, forward_transform, inverse_transform, lp_norm, nyquist_mask


def bullet(f):
    """Inverse transform of the modulus of the transform of ``f``."""
    return inverse_transform(forward_transform(f).modulus())


def autocorrelation(F):
    """Psi(xi) = int F(xi + eta) conj(F(eta)) d eta on the frequency lattice.

    Coefficients outside the lattice count as zero (no periodic wrap); lags
    are returned on the same centered lattice.
    """
    c = F.coeffs
    N = F.grid.points
    full = ssig.correlate(c, c, mode="full", method="auto")
    sl = tuple(slice(N // 2 - 1, N // 2 - 1 + N) for _ in range(c.ndim))
    return SpectralField(F.grid, full[sl] * F.grid.dual_volume)


def is_even_integer(p):
    return p != np.inf and float(p).is_integer() and int(p) % 2 == 0


@dataclass
class MajorantVerdict:
    majorant_holds: bool
    norm_f: float
    norm_g: float
    equality: bool
    p: float
    max_excess: float


def majorant_check(f, g, p, tol=1e-10):
    """Compare ``|f^|`` with a nonnegative transform ``g^`` and their L^p norms.

    Raises ``ValueError`` when ``g^`` is not real and nonnegative up to
    ``tol`` relative to its maximum.
    """
    F = forward_transform(f).coeffs
    G = forward_transform(g).coeffs
    gmax = float(np.max(np.abs(G)))
    if gmax > 0 and (np.max(np.abs(G.imag)) > tol * gmax or G.real.min() < -tol * gmax):
        raise ValueError("majorant transform must be real and nonnegative")
    excess = float(np.max(np.abs(F) - G.real)) if gmax > 0 else float(np.max(np.abs(F)))
    holds = excess <= tol * max(gmax, np.finfo(float).tiny)
    nf, ng = lp_norm(f, p), lp_norm(g, p)
    equality = holds and abs(nf - ng) <= 1e-9 * ng
    return MajorantVerdict(holds, nf, ng, bool(equality), float(p), excess)


@dataclass
class PhaseFit:
    """Fit ``phase(F(xi)) ~ alpha + beta . xi`` on the super-threshold set.

    ``shift`` is the spatial translation ``-beta / (2 pi)``: a field
    ``exp(i alpha) g(x - shift)`` with ``g^ >= 0`` has exactly this phase.
    """

    alpha: float
    beta: np.ndarray
    residual: float
    support_fraction: float
    components: int
    reached_fraction: float = 1.0

    @property
    def shift(self):
        return -np.asarray(self.beta) / (2 * math.pi)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def phase_fit(F, threshold=1e-8, linear=True):
    """Weighted least-squares fit of the transform phase.

    The fit uses lattice points with ``|F| > threshold * max|F|`` off the
    Nyquist planes, whose coefficient is real up to a common phase and so
    carries no translation information. Phases are
    unwrapped by breadth-first search from the largest coefficient through
    lattice neighbours inside that set, and weighted by ``|F|^2``. With
    ``linear=False`` only a constant phase is fitted (``beta = 0``).
    """
    c = F.coeffs
    mag = np.abs(c)
    amax = mag.max()
    mask = (mag > threshold * amax) & ~nyquist_mask(F.grid)
    if mask.sum() < 2:
        raise ValueError("phase fit needs at least two coefficients above threshold")
    components = int(ndi.label(mask)[1])
    w = mag**2
    ph = np.angle(c)
    n = F.grid.dim
    if not linear:
        alpha = float(np.angle(np.sum(w[mask] * np.exp(1j * ph[mask]))))
        resid = float(np.max(np.abs(_wrap(ph[mask] - alpha))))
        return PhaseFit(alpha, np.zeros(n), resid, float(mask.mean()), components)

    start = np.unravel_index(np.argmax(mag), mag.shape)
    unwrapped, reached = kernels.unwrap_phase(ph, mask, start)
    xi = np.asarray(F.grid.xi_mesh)[reached]
    design = np.concatenate([np.ones((xi.shape[0], 1)), xi], axis=1)
    sw = np.sqrt(w[reached])
    sol, *_ = np.linalg.lstsq(design * sw[:, None], unwrapped[reached] * sw, rcond=None)
    alpha, beta = float(sol[0]), sol[1:]
    model = alpha + np.asarray(F.grid.xi_mesh) @ beta
    resid = float(np.max(np.abs(_wrap(ph[mask] - model[mask]))))
    return PhaseFit(
        float(_wrap(alpha)),
        beta,
        resid,
        float(mask.mean()),
        components,
        float(reached.sum() / mask.sum()),
    )


def trig_poly_values(coeffs, x):
    """q(x) = sum_m c_m exp(2 pi i m x) for a finite coefficient map."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for m, c in coeffs.items():
        out += c * np.exp(2j * np.pi * m * x)
    return out


def lift_trig_poly(coeffs, lam, p, grid):
    """Gaussian lift of a torus polynomial and of its modulus-coefficient twin.

    Returns ``(q_lam, Q_lam)`` with ``q_lam(x) = lam^{1/(2p)} q(x) exp(-lam x^2)``
    where ``q`` has coefficients ``coeffs`` and ``Q`` has ``|coeffs|``.
    """
    if grid.dim != 1:
        raise ValueError("the Gaussian lift is one-dimensional")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    x = grid.x_axis
    env = lam ** (1.0 / (2 * p)) * np.exp(-lam * x**2)
    mods = {m: abs(c) for m, c in coeffs.items()}
    return Field(grid, env * trig_poly_values(coeffs, x)), Field(grid, env * trig_poly_values(mods, x))


def torus_norm(coeffs, p, n_points=4096):
    """||q||_{L^p(T)} on T = [0, 1) by uniform quadrature."""
    ms = sorted(coeffs)
    if ms and ms[0] < 0:
        raise ValueError("torus_norm expects nonnegative frequencies")
    row = np.zeros(ms[-1] + 1 if ms else 1, dtype=complex)
    for m in ms:
        row[m] = coeffs[m]
    return float(kernels.torus_lp_norms(row[None, :], p, n_points)[0])


@dataclass
class UMPSearchResult:
    p: float
    max_freq: int
    best_pattern: tuple
    best_ratio: float
    patterns: list = field(repr=False)
    ratios: np.ndarray = field(repr=False)

    def violations(self, tol=0.0):
        return [(pt, r) for pt, r in zip(self.patterns, self.ratios) if r > 1 + tol]


def ump_violation_search(p, max_freq, n_points=4096, allow_even=False, workers=None):
    """Exhaustive search for ``||q||_p > ||Q||_p`` over sign patterns.

    ``q`` ranges over trigonometric polynomials with coefficients in
    {-1, 0, 1} on frequencies 0..max_freq, ``Q`` has the moduli of those
    coefficients. Even integer ``p`` admits no violation, so it is rejected
    unless ``allow_even`` is set (used to confirm exactly that).
    """
    if not p > 2:
        raise ValueError(f"p must exceed 2, got {p}")
    if is_even_integer(p) and not allow_even:
        raise ValueError(f"p={p} is an even integer: no majorant violation exists")
    if not 0 <= max_freq <= 6:
        raise ValueError(f"max_freq must lie in 0..6, got {max_freq}")
    patterns = [
        pt for pt in itertools.product((-1, 0, 1), repeat=max_freq + 1) if any(pt)
    ]
    arr = np.array(patterns, dtype=float)
    workers = workers or max(1, int(os.environ.get("GSPEC_THREADS", "1")))
    chunks = np.array_split(np.arange(len(patterns)), workers)

    def _ratio(idx):
        q = kernels.torus_lp_norms(arr[idx], p, n_points)
        Q = kernels.torus_lp_norms(np.abs(arr[idx]), p, n_points)
        return q / Q

    if workers == 1:
        ratios = _ratio(chunks[0])
    else:
        with ThreadPoolExecutor(workers) as ex:
            ratios = np.concatenate(list(ex.map(_ratio, chunks)))
    top = ratios.max()
    tied = [i for i in range(len(patterns)) if ratios[i] >= top - 1e-12 * top]
    best = min(tied, key=lambda i: patterns[i])
    return UMPSearchResult(float(p), int(max_freq), patterns[best], float(ratios[best]), patterns, ratios)


def lattice_lookup_matrix(values, idx):
    """Matrix ``[f(x_k - x_l)]`` for lattice multi-indices ``idx`` (periodic)."""
    N = values.shape[0]
    idx = np.asarray(idx)
    diff = (idx[:, None, :] - idx[None, :, :] + N // 2) % N
    return values[tuple(diff[..., d] for d in range(values.ndim))]


def positive_definite_check(f, sample_count, seed=0, tol=1e-9):
    """Smallest eigenvalue of the Hermitian part of ``[f(x_k - x_l)]``.

    Sample points are drawn without replacement from the lattice with a
    seeded generator. Returns ``(is_psd, min_eigenvalue)``; PSD means
    ``min_eigenvalue >= -tol * max|f|``.
    """
    if sample_count < 2:
        raise ValueError("need at least two sample points")
    from .rng import make_rng

    g = f.grid
    rng = make_rng(seed, stream=0)
    count = min(int(sample_count), g.size)
    flat = rng.choice(g.size, size=count, replace=False)
    idx = np.stack(np.unravel_index(flat, g.shape), axis=1)
    M = lattice_lookup_matrix(f.values, idx)
    herm = 0.5 * (M + M.conj().T)
    lo = float(np.linalg.eigvalsh(herm)[0])
    return bool(lo >= -tol * f.max_abs()), lo


def bochner_margin(f):
    """``f(0) - max_x |f(x)|`` relative to ``max |f|`` (nonnegative for PSD f)."""
    v = f.values
    m = f.max_abs()
    if m == 0.0:
        return 0.0
    return float((v[f.grid.origin_index].real - m) / m)


@dataclass
class MinkowskiVerdict:
    ok: bool
    inside_box: bool
    mismatched: int
    support_f: int
    support_g: int
    support_conv: int
    minkowski: np.ndarray = field(repr=False)
    conv_support: np.ndarray = field(repr=False)


def _nonnegative_real(f, tol, label):
    v = np.asarray(f.values)
    scale = max(float(np.max(np.abs(v))), np.finfo(float).tiny)
    if np.max(np.abs(v.imag)) > tol * scale or v.real.min() < -tol * scale:
        raise ValueError(f"{label} must be real and nonnegative")
    return np.clip(v.real, 0.0, None)


def _support(a, tol):
    m = a.max() if a.size else 0.0
    return a > tol * m if m > 0 else np.zeros(a.shape, dtype=bool)


def support_minkowski_check(f, g, tol=1e-8):
    """Compare the support of ``f * g`` with the Minkowski sum of supports.

    Supports are ``{f > tol * max f}``. The convolution is the direct
    (non-periodic) lattice sum. The verdict holds when every mismatch lies in
    the one-cell boundary layer of the Minkowski sum. ``inside_box`` reports
    whether the convolution support fits in the box without wrapping.
    """
    fv = _nonnegative_real(f, tol, "f")
    gv = _nonnegative_real(g, tol, "g")
    A, B = _support(fv, tol), _support(gv, tol)
    M = kernels.minkowski_sum(A, B)
    conv = kernels.direct_convolve(fv, gv)
    C = _support(conv, tol)
    struct = np.ones((3,) * fv.ndim, dtype=bool)
    layer = ndi.binary_dilation(M, struct) & ~ndi.binary_erosion(M, struct)
    bad = (M ^ C) & ~layer
    N = f.grid.points
    inner = tuple(slice(N // 2, N // 2 + N) for _ in range(fv.ndim))
    outside = C.copy()
    outside[inner] = False
    return MinkowskiVerdict(
        ok=bool(not bad.any()),
        inside_box=bool(not outside.any()),
        mismatched=int(bad.sum()),
        support_f=int(A.sum()),
        support_g=int(B.sum()),
        support_conv=int(C.sum()),
        minkowski=M,
        conv_support=C,
    )


def lattice_convolution(f, g):
    """(f * g)(x) on the lattice: box-rule sum, no periodic wrap."""
    full = kernels.direct_convolve(np.real(f.values), np.real(g.values))
    N = f.grid.points
    sl = tuple(slice(N // 2, N // 2 + N) for _ in range(f.grid.dim))
    return Field(f.grid, full[sl] * f.grid.cell_volume)


def rearrangement_defects(f, sym=None, sigmas=(1, 2)):
    """Measured defects of the elementary properties of ``bullet(f)``.

    Returns a dict with the relative L^2 defect, the L^{2 sigma + 2} excess
    ``||f|| - ||f^bullet||`` (relative, should be <= 0), the conjugate-reflection
    defect and, when ``sym`` is given, the relative quadratic-form defect.
    """
    fb = bullet(f)
    n2 = lp_norm(f, 2)
    out = {
        "l2_defect": abs(lp_norm(fb, 2) - n2) / max(n2, np.finfo(float).tiny),
        "reflection_defect": float(
            np.max(np.abs(fb.reflect().values - fb.values.conj())) / max(fb.max_abs(), np.finfo(float).tiny)
        ),
    }
    for s in sigmas:
        q = 2 * s + 2
        a, b = lp_norm(f, q), lp_norm(fb, q)
        out[f"lp{q}_excess"] = (a - b) / max(b, np.finfo(float).tiny)
    if sym is not None:
        from .grid import quad_form

        qa = quad_form(forward_transform(f), sym)
        qb = quad_form(forward_transform(fb), sym)
        out["quad_form_defect"] = abs(qa - qb) / max(abs(qa), np.finfo(float).tiny)
    return out
