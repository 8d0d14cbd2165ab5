"""Ground states of ``P(D) Q + lam Q - |Q|^{2 sigma} Q = 0``.

Solutions are computed by Petviashvili iteration on the Fourier fixed point
``Q^ = (p + lam)^{-1} (|Q|^{2 sigma} Q)^``. The module also evaluates the
action and Sobolev quotient and runs the structural predicate suite on a
converged state.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np
import scipy.ndimage as ndi
import scipy.signal as ssig

from .grid import (
    Field,
    SpectralField,
    boundary_amplitude,
    forward_transform,
    interpolate,
    inverse_transform,
    padding_factor,
    power_integral,
    power_nonlinearity,
    quad_form,
    translate,
)
from .rearrangement import bochner_margin, bullet, phase_fit
from .report import ConvergenceError, DivergenceError, VerificationReport
from .rng import random_bandlimited


def critical_sigma(n, s):
    """2s / (n - 2s) for s < n/2, infinity otherwise."""
    return 2 * s / (n - 2 * s) if s < n / 2 else math.inf


@dataclass(frozen=True, eq=False)
class NonlinearProblem:
    symbol: object
    lam: float
    sigma: int
    grid: object

    def __post_init__(self):
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise ValueError(f"sigma must be a positive integer, got {self.sigma}")
        object.__setattr__(self, "sigma", int(self.sigma))
        crit = critical_sigma(self.grid.dim, self.symbol.s)
        if not self.sigma < crit:
            raise ValueError(
                f"sigma={self.sigma} is not below the critical exponent {crit:g} "
                f"for n={self.grid.dim}, s={self.symbol.s:g}"
            )
        min_p = float(self.symbol.on_grid(self.grid).min())
        if not self.lam + min_p > 0:
            raise ValueError(f"lambda={self.lam} must exceed -min p = {-min_p:g}")
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def power(self):
        """Exponent 2 sigma + 2 of the potential-energy norm."""
        return 2 * self.sigma + 2

    @property
    def denom(self):
        return self.symbol.on_grid(self.grid) + self.lam


@dataclass
class NonlinearSolution:
    state: Field
    residual: float
    iterations: int
    action_value: float
    sobolev_quotient: float
    history: list = field(default_factory=list)


def _spectral(f):
    return f if isinstance(f, SpectralField) else forward_transform(f)


def kinetic(f, prob):
    """<f, (P(D) + lam) f>."""
    return quad_form(_spectral(f), prob.symbol, prob.lam)


def potential(f, prob):
    """||f||_{2 sigma + 2}^{2 sigma + 2} of the trigonometric interpolant.

    Exact integration keeps the functional consistent with the dealiased
    equation: its gradient is exactly the dealiased nonlinearity.
    """
    return power_integral(_spectral(f), prob.power)


def action(f, prob):
    """1/2 <f, (P + lam) f> - ||f||_{2 sigma + 2}^{2 sigma + 2} / (2 sigma + 2)."""
    F = _spectral(f)
    return 0.5 * kinetic(F, prob) - potential(F, prob) / prob.power


def sobolev_quotient(f, prob):
    """||f||_{2 sigma + 2}^2 / <f, (P + lam) f>."""
    F = _spectral(f)
    k = kinetic(F, prob)
    if k == 0.0:
        raise ValueError("Sobolev quotient undefined for the zero field")
    return potential(F, prob) ** (2.0 / prob.power) / k


def equation_defect(F, prob):
    """Coefficients of P(D) Q + lam Q - |Q|^{2 sigma} Q (dealiased)."""
    return SpectralField(F.grid, prob.denom * F.coeffs - power_nonlinearity(F, prob.sigma).coeffs)


def residual(Q, prob):
    """L^2 norm of the equation defect."""
    return equation_defect(_spectral(Q), prob).l2_norm()


def linearized_defect(Q, h, prob):
    """Derivative of the equation defect at ``Q`` in direction ``h``."""
    q, v = Q.values, h.values
    s = prob.sigma
    a2 = np.abs(q) ** 2
    nl = (s + 1) * a2**s * v + s * a2 ** (s - 1) * q * q * v.conj()
    H = forward_transform(h)
    return SpectralField(h.grid, prob.denom * H.coeffs - forward_transform(Field(h.grid, nl)).coeffs)


def petviashvili_step(F, prob):
    """One stabilized fixed-point update; returns (new coefficients, S)."""
    g = F.grid
    N = power_nonlinearity(F, prob.sigma).coeffs
    num = np.sum(prob.denom * np.abs(F.coeffs) ** 2)
    den = np.real(np.vdot(F.coeffs, N))
    if not den > 0:
        raise DivergenceError("stabilizing factor undefined (nonpositive nonlinear pairing)")
    S = num / den
    gamma = (2 * prob.sigma + 1) / (2 * prob.sigma)
    return SpectralField(g, S**gamma * N / prob.denom), float(S)


def petviashvili_solve(prob, init, tol=1e-10, max_iters=500):
    """Petviashvili iteration until the equation residual is below ``tol``."""
    if init.grid != prob.grid:
        raise ValueError("initial field lives on a different grid")
    if init.max_abs() == 0.0:
        raise ValueError("initial field must be nonzero")
    F = forward_transform(init)
    history = []
    for it in range(max_iters + 1):
        res = residual(F, prob)
        history.append(res)
        if not math.isfinite(res):
            raise DivergenceError("iteration produced non-finite values", res, it, history)
        if res <= tol:
            Q = inverse_transform(F)
            return NonlinearSolution(Q, res, it, action(Q, prob), sobolev_quotient(Q, prob), history)
        if it == max_iters:
            break
        F, S = petviashvili_step(F, prob)
        if not 1e-12 < S < 1e12:
            raise DivergenceError(f"stabilizing factor left its range (S={S:.3e})", res, it, history)
    raise ConvergenceError(
        f"Petviashvili iteration did not converge in {max_iters} iterations (residual {res:.3e})",
        residual=res,
        iterations=max_iters,
        history=history,
    )


def gaussian_init(grid, width, center=0.0, amplitude=1.0):
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    return grid.sample(lambda x: amplitude * np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * width**2)))


def start_fields(grid, seeds):
    """One initial field per seed.

    Widths run geometrically from L/16 to L/4. The last start carries an odd
    perturbation along the first axis; every start gets a small seeded
    band-limited perturbation.
    """
    seeds = list(seeds)
    m = len(seeds)
    widths = grid.length * np.geomspace(1 / 16, 1 / 4, m) if m > 1 else [grid.length / 8]
    out = []
    for i, (seed, w) in enumerate(zip(seeds, widths)):
        base = gaussian_init(grid, w)
        noise = random_bandlimited(grid, seed, band=max(2, grid.points // 16))
        f = base + noise * (1e-2 / max(noise.max_abs(), 1e-300))
        if i == m - 1 and m > 1:
            x1 = grid.x_mesh[..., 0]
            f = f + Field(grid, (x1 / w) * base.values)
        out.append(f)
    return out


@dataclass
class StartRecord:
    seed: int
    converged: bool
    action: float = None
    residual: float = None
    iterations: int = None
    error: str = None
    solution: NonlinearSolution = field(default=None, repr=False)


def multi_start(prob, seeds=(1, 2, 3, 4, 5), tol=1e-10, max_iters=500, workers=None):
    """Solve from several seeded starts; return (best solution, records).

    The best solution is the converged one with the smallest action. Records
    are sorted by seed regardless of completion order.
    """
    seeds = sorted(int(s) for s in seeds)
    inits = start_fields(prob.grid, seeds)
    workers = workers or max(1, int(os.environ.get("GSPEC_THREADS", "1")))

    def run(args):
        seed, init = args
        try:
            sol = petviashvili_solve(prob, init, tol, max_iters)
        except ConvergenceError as exc:
            return StartRecord(seed, False, residual=exc.residual, iterations=exc.iterations, error=str(exc))
        return StartRecord(seed, True, sol.action_value, sol.residual, sol.iterations, solution=sol)

    if workers == 1:
        records = [run(a) for a in zip(seeds, inits)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            records = list(ex.map(run, zip(seeds, inits)))
    good = [r for r in records if r.converged]
    if not good:
        raise ConvergenceError("no start converged", residual=min(r.residual for r in records))
    best = min(good, key=lambda r: (r.action, r.seed))
    return best.solution, records


@dataclass
class DecayFit:
    rate: float
    residual: float
    window: tuple
    radii: np.ndarray = field(repr=False)
    log_profile: np.ndarray = field(repr=False)
    fit_radii: np.ndarray = field(repr=False)
    fit_values: np.ndarray = field(repr=False)
    intercept: float = 0.0
    envelope: bool = False
    slope_ratio: float = 1.0

    @property
    def profile(self):
        """``exponential``, ``superexponential`` or ``subexponential``.

        Judged from the ratio of the decay rates fitted on the outer and inner
        halves of the window (1 for a pure exponential).
        """
        if self.slope_ratio > 1.1:
            return "superexponential"
        if self.slope_ratio < 0.9:
            return "subexponential"
        return "exponential"

    @property
    def confirmed(self):
        return bool(self.rate > 0 and self.residual < 0.1 and self.profile != "subexponential")


def tail_profile(Q, center=None):
    """(r, |Q| profile) about ``center``: both tails averaged in 1D, shell means otherwise."""
    g = Q.grid
    c = np.zeros(g.dim) if center is None else np.broadcast_to(np.asarray(center, dtype=float), (g.dim,))
    a = np.abs(Q.values)
    d = g.x_mesh - c
    d = (d + g.length / 2) % g.length - g.length / 2
    r = np.linalg.norm(d, axis=-1)
    h = g.spacing
    if g.dim == 1:
        order = np.argsort(r, kind="stable")
        r, a = r[order], a[order]
        bins = np.rint(r / h * 2).astype(int)
    else:
        bins = np.rint(r / h).astype(int).ravel()
        r, a = r.ravel(), a.ravel()
    counts = np.bincount(bins)
    keep = counts > 0
    rr = (np.bincount(bins, r) / np.maximum(counts, 1))[keep]
    aa = (np.bincount(bins, a) / np.maximum(counts, 1))[keep]
    return rr, aa


def tail_floor(r, a, half_box):
    """Relative noise level of a profile: its median over 70-90% of the half box.

    For a decayed state this is the level of the truncation and rounding
    errors that mask the true tail.
    """
    sel = (r > 0.7 * half_box) & (r <= 0.9 * half_box)
    if not sel.any():
        return 1e-13
    return max(1e-13, float(np.median(a[sel]) / a.max()))


def decay_fit(Q, window=None, center=None, floor=None):
    """Exponential rate ``a`` in ``|Q| ~ C exp(-a |x|)`` from a log-linear fit.

    With ``window=None`` the window runs from where the profile first drops
    below 1e-2 of its maximum to the last radius where it stays above
    ``100 * floor`` times the maximum, and never past 90% of the half box.
    ``floor`` defaults to :func:`tail_floor`. Oscillating tails are fitted
    through their local maxima.
    """
    g = Q.grid
    r, a = tail_profile(Q, center)
    amax = a.max()
    if amax == 0:
        raise ValueError("cannot fit the decay of the zero field")
    rmax = 0.9 * g.length / 2
    if window is None:
        if floor is None:
            floor = tail_floor(r, a, g.length / 2)
        below = np.nonzero(a < 1e-2 * amax)[0]
        r0 = r[below[0]] if below.size else r[-1]
        alive = np.nonzero((a >= 100 * floor * amax) & (r > r0) & (r <= rmax))[0]
        r1 = r[alive[-1]] if alive.size else r0
        if np.count_nonzero((r >= r0) & (r <= r1)) < 3:
            # no noise plateau inside the box: the outer profile is signal
            r1 = r[r <= rmax][-1]
    else:
        r0, r1 = map(float, window)
        if r1 > rmax + 1e-12:
            raise ValueError(f"window end {r1} enters the outer 10% of the box (limit {rmax:g})")
        dead = np.nonzero((a < 1e-300) & (r >= r0) & (r <= r1))[0]
        if dead.size:
            r1 = r[dead[0]]
    sel = (r >= r0) & (r <= r1)
    rs, ls = r[sel], np.log(np.maximum(a[sel], 1e-300))
    if rs.size < 3:
        raise ValueError(f"decay window ({r0:g}, {r1:g}) holds fewer than three samples")
    envelope = False
    fr, fl = rs, ls
    if np.any(np.diff(ls) > 0):
        peaks, _ = ssig.find_peaks(ls)
        if peaks.size >= 3:
            fr, fl, envelope = rs[peaks], ls[peaks], True
    slope, icpt = np.polyfit(fr, fl, 1)
    res = float(np.sqrt(np.mean((fl - (icpt + slope * fr)) ** 2)))
    ratio = 1.0
    mid = 0.5 * (fr[0] + fr[-1])
    inner, outer = fr <= mid, fr >= mid
    if inner.sum() >= 2 and outer.sum() >= 2:
        s_in = np.polyfit(fr[inner], fl[inner], 1)[0]
        s_out = np.polyfit(fr[outer], fl[outer], 1)[0]
        if s_in < 0:
            ratio = float(s_out / s_in)
    return DecayFit(
        rate=float(-slope),
        residual=res,
        window=(float(r0), float(r1)),
        radii=rs,
        log_profile=ls,
        fit_radii=fr,
        fit_values=icpt + slope * fr,
        intercept=float(icpt),
        envelope=envelope,
        slope_ratio=ratio,
    )


def omega_fullness(F, threshold=1e-8):
    """Fraction of the lattice where |F| > threshold * max |F|, plus a verdict.

    Nyquist planes are left out: a translation scales their coefficient by
    a cosine factor that can vanish for any profile.

    The verdict is ``pass`` when the fraction is 1, ``inconclusive`` when the
    only sub-threshold coefficients form tails touching the lattice edge of a
    connected positive set, and ``fail`` when the set has interior holes or
    several components.
    """
    inner = tuple(slice(1, None) for _ in range(F.grid.dim))
    mag = np.abs(F.coeffs)[inner]
    mask = mag > threshold * mag.max()
    frac = float(mask.mean())
    if frac == 1.0:
        return frac, "pass"
    struct = np.ones((3,) * mask.ndim, dtype=bool)
    _, comps = ndi.label(mask, struct)
    holes, nh = ndi.label(~mask, struct)
    edge = np.zeros(mask.shape, dtype=bool)
    for ax in range(mask.ndim):
        idx = [slice(None)] * mask.ndim
        idx[ax] = 0
        edge[tuple(idx)] = True
        idx[ax] = -1
        edge[tuple(idx)] = True
    touching = set(np.unique(holes[edge & ~mask]))
    interior = any(k not in touching for k in range(1, nh + 1))
    if comps == 1 and not interior:
        return frac, "inconclusive"
    return frac, "fail"


def align(Q, fit=None):
    """Return (alpha, x0, aligned) with ``Q ~ exp(i alpha) Q_bullet(x - x0)``.

    ``aligned`` is ``exp(-i alpha) Q(x + x0)``. When the phase fit is poor
    the offset is taken from the cross-correlation peak of Q and Q_bullet.
    """
    F = forward_transform(Q)
    fit = fit or phase_fit(F)
    if fit.residual <= 1e-3:
        alpha, x0 = fit.alpha, fit.shift
    else:
        corr = inverse_transform(SpectralField(Q.grid, F.coeffs * np.abs(F.coeffs))).values
        k = np.unravel_index(np.argmax(np.abs(corr)), corr.shape)
        alpha = float(np.angle(corr[k]))
        x0 = np.asarray(Q.grid.x_mesh[k])
    aligned = inverse_transform(translate(F, -np.asarray(x0)) * np.exp(-1j * alpha))
    return float(alpha), np.atleast_1d(np.asarray(x0, dtype=float)), aligned


def proportionality(Q, floor=1e-6, tol=1e-6):
    """Check ``Q_I = c Q_R`` on ``{|Q_R| > floor * ||Q||}`` or one part negligible.

    Returns (verdict, spread) where spread is the standard deviation of
    ``Q_I / Q_R``, or of ``Q_R / Q_I`` when the imaginary part dominates.
    """
    q = Q.values
    m = np.max(np.abs(q))
    re, im = q.real, q.imag
    if np.max(np.abs(re)) <= 1e-10 * m or np.max(np.abs(im)) <= 1e-10 * m:
        return True, 0.0
    num, den = (im, re) if np.max(np.abs(re)) >= np.max(np.abs(im)) else (re, im)
    sel = np.abs(den) > floor * m
    spread = float(np.std(num[sel] / den[sel]))
    return bool(spread < tol), spread


def verify_nonlinear(
    sol,
    prob,
    phase_tol=1e-5,
    align_tol=1e-5,
    pohozaev_tol=1e-8,
    symmetry_tol=1e-7,
    fullness_threshold=1e-8,
    decay_window=None,
):
    """Structural predicate suite for a converged solution."""
    g = prob.grid
    Q = sol.state
    F = forward_transform(Q)
    rep = VerificationReport()
    qn = Q.max_abs()

    # a coefficient of size |c| fixes its phase only to ~ err/|c|; test the
    # phase where that is ten times below phase_tol
    err = sol.residual * math.sqrt(g.dual_volume**-1) / float(prob.denom.min())
    phase_threshold = min(1e-2, max(fullness_threshold, 10 * err / (phase_tol * np.abs(F.coeffs).max())))
    try:
        fit = phase_fit(F, threshold=phase_threshold)
        rep.add("phase_fit", bool(fit.residual < phase_tol), fit.residual, phase_tol, "transform phase is affine in xi")
    except ValueError:
        fit = None
        rep.add("phase_fit", "inconclusive", None, phase_tol, "transform phase is affine in xi")

    frac, fverdict = omega_fullness(F, fullness_threshold)
    rep.add("omega_fullness", fverdict, frac, 1.0, "transform vanishes nowhere")

    alpha, x0, aligned = align(Q, fit)
    Qb = bullet(Q)
    target = inverse_transform(translate(forward_transform(Qb), x0) * np.exp(1j * alpha))
    adef = float(np.max(np.abs(Q.values - target.values)) / qn)
    rep.add("alignment", bool(adef < align_tol), adef, align_tol, "Q = exp(i alpha) Q_bullet(x - x0)")

    bm = bochner_margin(Qb)
    rep.add("bochner_peak", bool(bm >= -1e-12), bm, -1e-12, "Q_bullet(0) >= |Q_bullet(x)|")

    realness = evenness = None
    if prob.symbol.is_even:
        realness = float(np.max(np.abs(aligned.values.imag)) / qn)
        evenness = float(np.max(np.abs(aligned.values - aligned.reflect().values)) / qn)
        rep.add("realness", bool(realness < symmetry_tol), realness, symmetry_tol, "real and even for even symbols")
        rep.add("evenness", bool(evenness < symmetry_tol), evenness, symmetry_tol, "real and even for even symbols")
    else:
        rep.add("realness", "skipped", None, symmetry_tol, "real and even for even symbols")
        rep.add("evenness", "skipped", None, symmetry_tol, "real and even for even symbols")

    kin = kinetic(F, prob)
    pot = potential(F, prob)
    poh = abs(kin - pot) / pot
    rep.add("pohozaev", bool(poh < pohozaev_tol), poh, pohozaev_tol, "<Q, (P + lam) Q> = ||Q||^{2 sigma + 2}")

    if prob.symbol.is_even:
        ok, spread = proportionality(Q)
        rep.add("real_imag_proportional", ok, spread, 1e-6, "Q_I = c Q_R at equality in the splitting bound")
    else:
        rep.add("real_imag_proportional", "skipped", None, 1e-6, "Q_I = c Q_R at equality in the splitting bound")

    try:
        dfit = decay_fit(Q, decay_window, center=x0)
        rep.add("exponential_decay", dfit.confirmed, dfit.rate, 0.0, "e^{a|x|} Q in L^2 for some a > 0")
        rate, dres, window, shape = dfit.rate, dfit.residual, dfit.window, dfit.profile
    except ValueError as exc:
        rep.add("exponential_decay", "inconclusive", None, 0.0, "e^{a|x|} Q in L^2 for some a > 0")
        rate, dres, window, shape = None, str(exc), None, None

    rep.quantities = {
        "lambda": prob.lam,
        "sigma": prob.sigma,
        "action": sol.action_value,
        "sobolev_quotient": sol.sobolev_quotient,
        "pohozaev_defect": poh,
        "omega_fullness": frac,
        "phase_alpha": alpha,
        "phase_residual": None if fit is None else fit.residual,
        "phase_fit_threshold": phase_threshold,
        "shift_x0": x0,
        "alignment_defect": adef,
        "realness_defect": realness,
        "evenness_defect": evenness,
        "decay_rate": rate,
        "decay_fit_residual": dres,
        "decay_window": window,
        "decay_profile": shape,
        "boundary_amplitude": boundary_amplitude(Q),
        "iterations": sol.iterations,
        "residual": sol.residual,
    }
    return rep


def _mp_action(qre, qim, cre, cim, weights, vol, dvol, q):
    """Action of a field given as mpf arrays of samples and coefficients."""
    kin = mpmath.fsum(w * (a * a + b * b) for w, a, b in zip(weights, cre, cim)) * dvol
    pot = mpmath.fsum((a * a + b * b) ** (q // 2) for a, b in zip(qre, qim)) * vol
    return kin / 2 - pot / q


def gradient_check(sol, prob, seeds=(1, 2, 3), eps=1e-10, dps=40):
    """Directional derivative of the action vs a central finite difference.

    The discrete action is a polynomial in the transform coefficients and in
    the interpolated samples, so ``A(Q + t h)`` can be evaluated exactly for
    the float64 arrays of ``Q`` and ``h``. Working in ``dps``-digit arithmetic removes the cancellation
    that makes a float64 difference quotient useless at a critical point,
    where the derivative itself is of the order of the residual.

    Returns a list of (derivative, finite difference, relative error).
    """
    g = prob.grid
    q = prob.power
    factor = padding_factor(q)
    FQ = forward_transform(sol.state)
    Qf = interpolate(FQ, factor)
    FQ = FQ.coeffs.ravel()
    weights = prob.denom.ravel()
    out = []
    with mpmath.workdps(dps):
        mpf = mpmath.mpf
        w = [mpf(float(x)) for x in weights]
        vol, dvol = mpf(Qf.grid.cell_volume), mpf(g.dual_volume)
        qre = [mpf(float(x)) for x in Qf.values.real.ravel()]
        qim = [mpf(float(x)) for x in Qf.values.imag.ravel()]
        cre = [mpf(float(x)) for x in FQ.real]
        cim = [mpf(float(x)) for x in FQ.imag]
        e = mpf(eps)
        for seed in seeds:
            h = random_bandlimited(g, seed, stream=7)
            h = h * (1.0 / math.sqrt(np.sum(np.abs(h.values) ** 2) * g.cell_volume))
            FH = forward_transform(h)
            hf = interpolate(FH, factor).values.ravel()
            FH = FH.coeffs.ravel()
            hre = [mpf(float(x)) for x in hf.real]
            him = [mpf(float(x)) for x in hf.imag]
            dre = [mpf(float(x)) for x in FH.real]
            dim = [mpf(float(x)) for x in FH.imag]

            def at(t):
                return _mp_action(
                    [a + t * b for a, b in zip(qre, hre)],
                    [a + t * b for a, b in zip(qim, him)],
                    [a + t * b for a, b in zip(cre, dre)],
                    [a + t * b for a, b in zip(cim, dim)],
                    w,
                    vol,
                    dvol,
                    q,
                )

            fd = (at(e) - at(-e)) / (2 * e)
            kin = mpmath.fsum(wi * (a * c + b * d) for wi, a, b, c, d in zip(w, dre, dim, cre, cim)) * dvol
            pot = mpmath.fsum(
                (a * a + b * b) ** (q // 2 - 1) * (a * c + b * d) for a, b, c, d in zip(qre, qim, hre, him)
            ) * vol
            deriv = kin - pot
            rel = abs(deriv - fd) / abs(fd) if fd != 0 else (mpf(0) if deriv == 0 else mpmath.inf)
            out.append((float(deriv), float(fd), float(rel)))
    return out
