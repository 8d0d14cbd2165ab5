"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL criterion k`` line with the
measured figures before asserting.
"""

import itertools
import json
import os
import time

import numpy as np
import pytest
from scipy.signal import fftconvolve

from gspec.cli import main
from gspec.grid import Field, forward_transform, lp_norm, make_grid, quad_form
from gspec.linear import LinearProblem, birman_schwinger_iterate, gaussian_well, solve_dense, solve_iterative, verify_linear
from gspec.nonlinear import (
    NonlinearProblem,
    align,
    decay_fit,
    gaussian_init,
    gradient_check,
    multi_start,
    petviashvili_solve,
    verify_nonlinear,
)
from gspec.rearrangement import bullet, lift_trig_poly, support_minkowski_check, ump_violation_search
from gspec.rng import make_rng, random_bandlimited
from gspec.symbols import bessel, bilaplacian, fractional_laplacian


@pytest.fixture
def verdict(capsys):
    def _report(k, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
        return ok

    return _report


# -- shared solves -----------------------------------------------------------

SUITE = [
    ("fractional s=1", lambda: fractional_laplacian(1.0), 1.0, 256, 80.0),
    ("bessel s=1", lambda: bessel(1.0), 1.0, 256, 60.0),
    ("bilaplacian mu=0", lambda: bilaplacian(0.0), 1.0, 128, 80.0),
    ("bilaplacian mu=-4", lambda: bilaplacian(-4.0), 5.0, 512, 200.0),
]


@pytest.fixture(scope="module")
def sech_run():
    g = make_grid(1, 1024, 40 * np.pi)
    prob = NonlinearProblem(fractional_laplacian(1.0), 1.0, 1, g)
    t = time.perf_counter()
    sol = petviashvili_solve(prob, gaussian_init(g, 2.0, center=1.3) * np.exp(0.4j), max_iters=200)
    return prob, sol, time.perf_counter() - t


@pytest.fixture(scope="module")
def suite_runs():
    t = time.perf_counter()
    runs = []
    for name, sym, lam, N, L in SUITE:
        prob = NonlinearProblem(sym(), lam, 1, make_grid(1, N, L))
        best, records = multi_start(prob)
        runs.append((name, prob, best, records, verify_nonlinear(best, prob)))
    return runs, time.perf_counter() - t


# -- criteria ----------------------------------------------------------------


def test_criterion_1_soliton(sech_run, verdict):
    prob, sol, elapsed = sech_run
    _, x0, aligned = align(sol.state)
    err = float(np.max(np.abs(aligned.values - np.sqrt(2) / np.cosh(prob.grid.x_axis))))
    ok = sol.iterations <= 200 and err < 1e-6 and elapsed < 5.0
    verdict(1, ok, f"iterations={sol.iterations} max_error={err:.2e} x0={x0[0]:.6f} runtime={elapsed:.2f}s")
    assert ok


def test_criterion_2_rearrangement(verdict):
    grids = [make_grid(1, 256, 20.0), make_grid(2, 32, 8.0), make_grid(3, 16, 4.0)]
    syms = [bilaplacian(-2.0, dim=g.dim) for g in grids]
    t = time.perf_counter()
    violations = 0
    worst = dict(l2=0.0, lp=-np.inf, refl=0.0, quad=0.0)
    for i in range(1000):
        g, sym = grids[i % 3], syms[i % 3]
        f = random_bandlimited(g, 2024, stream=i)
        fb = bullet(f)
        n2 = lp_norm(f, 2)
        l2 = abs(lp_norm(fb, 2) - n2) / n2
        refl = float(np.max(np.abs(fb.reflect().values - fb.values.conj())) / fb.max_abs())
        q1, q2 = quad_form(forward_transform(f), sym), quad_form(forward_transform(fb), sym)
        quad = abs(q1 - q2) / max(abs(q1), 1e-300)
        lp = max(lp_norm(f, 2 * s + 2) - lp_norm(fb, 2 * s + 2) for s in (1, 2))
        worst = dict(l2=max(worst["l2"], l2), lp=max(worst["lp"], lp), refl=max(worst["refl"], refl), quad=max(worst["quad"], quad))
        violations += (l2 > 1e-12) + (lp > 1e-10) + (refl > 1e-12) + (quad > 1e-12)
    elapsed = time.perf_counter() - t
    ok = violations == 0 and elapsed < 60
    verdict(
        2,
        ok,
        f"violations={violations} l2={worst['l2']:.1e} lp_excess={worst['lp']:.1e} "
        f"reflection={worst['refl']:.1e} quad={worst['quad']:.1e} runtime={elapsed:.1f}s",
    )
    assert ok


def test_criterion_3_linear(verdict):
    g = make_grid(1, 64, 20.0)
    prob = LinearProblem(fractional_laplacian(1.0), gaussian_well(g), g)
    d, i, b = solve_dense(prob), solve_iterative(prob), birman_schwinger_iterate(prob)
    spread = max(d.energy, i.energy, b.energy) - min(d.energy, i.energy, b.energy)
    rep = verify_linear(d, prob)
    q = rep.quantities
    excited = verify_linear(solve_dense(prob, level=1), prob)
    ok = (
        spread < 1e-7
        and q["min_fourier_positivity_margin"] > 1e-6
        and q["gap"] > 0
        and q["symmetry_defect"] < 1e-8
        and q["realness_defect"] < 1e-8
        and excited.verdict("fourier_positivity") == "fail"
    )
    verdict(
        3,
        ok,
        f"E0={d.energy:.12f} spread={spread:.1e} margin={q['min_fourier_positivity_margin']:.3e} "
        f"gap={q['gap']:.4f} symmetry={q['symmetry_defect']:.1e} realness={q['realness_defect']:.1e} "
        f"excited_positivity={excited.verdict('fourier_positivity')}",
    )
    assert ok


def test_criterion_4_nonlinear_suite(suite_runs, verdict):
    runs, elapsed = suite_runs
    ok = elapsed < 120
    parts = []
    for name, prob, best, _, rep in runs:
        q = rep.quantities
        good = (
            q["omega_fullness"] == 1.0
            and q["phase_residual"] < 1e-5
            and q["alignment_defect"] < 1e-5
            and q["pohozaev_defect"] < 1e-8
            and q["realness_defect"] < 1e-7
            and q["evenness_defect"] < 1e-7
        )
        ok &= good
        parts.append(
            f"[{name}: fullness={q['omega_fullness']} phase={q['phase_residual']:.1e} "
            f"align={q['alignment_defect']:.1e} pohozaev={q['pohozaev_defect']:.1e} "
            f"real={q['realness_defect']:.1e} even={q['evenness_defect']:.1e}]"
        )
    verdict(4, ok, " ".join(parts) + f" runtime={elapsed:.1f}s")
    assert ok


def test_criterion_5_decay(sech_run, suite_runs, verdict):
    prob, sol, _ = sech_run
    _, x0, _ = align(sol.state)
    rate = decay_fit(sol.state, window=(5, 15), center=x0).rate
    fits = [("sech", decay_fit(sol.state, center=x0))]
    for name, _, _, records, _ in suite_runs[0]:
        for r in records:
            if r.converged:
                fits.append((f"{name}/seed{r.seed}", decay_fit(r.solution.state, center=align(r.solution.state)[1])))
    bad = [n for n, f in fits if not (f.rate > 0 and f.residual < 0.1)]
    ok = abs(rate - 1.0) <= 0.05 and not bad
    verdict(5, ok, f"sech rate={rate:.5f} fits={len(fits)} min_rate={min(f.rate for _, f in fits):.3f} "
            f"max_residual={max(f.residual for _, f in fits):.3f} bad={bad}")
    assert ok


def test_criterion_6_ump(verdict):
    t = time.perf_counter()
    even = ump_violation_search(4, 3, allow_even=True)
    odd = ump_violation_search(3, 3)
    coeffs = {m: float(c) for m, c in enumerate(odd.best_pattern) if c}
    q, Q = lift_trig_poly(coeffs, 1e-2, 3, make_grid(1, 8192, 160.0))
    lift = lp_norm(q, 3) / lp_norm(Q, 3)
    elapsed = time.perf_counter() - t
    ok = even.best_ratio <= 1 + 1e-10 and odd.best_ratio > 1 and lift > 1 and elapsed < 30
    verdict(
        6,
        ok,
        f"p=4 max_ratio={even.best_ratio:.12f} p=3 best={odd.best_pattern} ratio={odd.best_ratio:.6f} "
        f"lift_ratio={lift:.6f} runtime={elapsed:.2f}s",
    )
    assert ok


def _random_pair(rng, dim):
    g = make_grid(dim, 32 if dim == 1 else 16, 8.0)
    vals = []
    for _ in range(2):
        v = np.zeros(g.shape)
        for _ in range(rng.integers(1, 4)):
            lo = rng.integers(2, g.points // 2 + 2, size=dim)
            hi = lo + rng.integers(1, g.points // 4, size=dim)
            box = tuple(slice(a, b) for a, b in zip(lo, hi))
            v[box] = rng.uniform(0.5, 1.5, size=v[box].shape)
        vals.append(Field(g, v))
    return vals


def _minkowski_oracle(a, b):
    pa, pb = np.argwhere(a), np.argwhere(b)
    out = np.zeros(tuple(np.array(a.shape) + np.array(b.shape) - 1), dtype=bool)
    for i, j in itertools.product(pa, pb):
        out[tuple(i + j)] = True
    return out


def test_criterion_7_supports(verdict):
    rng = make_rng(7)
    violations = 0
    worst_conv = 0.0
    for k in range(50):
        f, g = _random_pair(rng, 1 + k % 2)
        v = support_minkowski_check(f, g)
        oracle = _minkowski_oracle(f.values.real > 0, g.values.real > 0)
        ref = fftconvolve(f.values.real, g.values.real)
        direct = np.zeros_like(ref)
        for i in np.argwhere(f.values.real > 0):
            sl = tuple(slice(a, a + n) for a, n in zip(i, g.grid.shape))
            direct[sl] += f.values.real[tuple(i)] * g.values.real
        worst_conv = max(worst_conv, float(np.max(np.abs(direct - ref))))
        violations += (not v.ok) + int(np.any(v.minkowski != oracle)) + int(np.any(v.conv_support != (direct > 1e-8 * direct.max())))
    ok = violations == 0
    verdict(7, ok, f"pairs=50 violations={violations} direct_vs_fft={worst_conv:.1e}")
    assert ok


def test_criterion_8_gradient(sech_run, suite_runs, verdict):
    worst = 0.0
    count = 0
    prob, sol, _ = sech_run
    cases = [(prob, sol)] + [(p, best) for _, p, best, _, _ in suite_runs[0]]
    for p, s in cases:
        for _, _, rel in gradient_check(s, p, seeds=(1, 2, 3)):
            worst = max(worst, rel)
            count += 1
    ok = worst < 1e-6
    verdict(8, ok, f"problems={len(cases)} directions={count} worst_relative_error={worst:.2e}")
    assert ok


def test_criterion_9_determinism(tmp_path, verdict):
    configs = {
        "nonlinear": "mode: solve_nonlinear\ngrid: {n: 1, N: 256, L: 80.0}\n"
        "symbol: {name: fractional_laplacian, s: 1.0}\nlambda: 1.0\nsigma: 1\nsolver: {gradient_check: true}\n",
        "linear": "mode: solve_linear\ngrid: {n: 1, N: 64, L: 20.0}\nsymbol: {name: bessel, s: 1.0}\n"
        "potential: {name: gaussian_well}\nsolver: {method: iterative}\n",
        "rearrange": "mode: rearrange\ngrid: {n: 2, N: 16, L: 4.0}\nrearrange: {samples: 30}\n",
        "ump": "mode: ump_search\nump: {p: 3, max_freq: 3, lift_lambda: 0.01}\n",
    }
    same = {}
    for name, text in configs.items():
        path = tmp_path / f"{name}.yaml"
        path.write_text(text)
        blobs = []
        for run, threads in enumerate(("1", "3")):
            os.environ["GSPEC_THREADS"] = threads
            out = tmp_path / f"{name}{run}"
            cmd = "ump-search" if name == "ump" else "solve"
            assert main([cmd, "--config", str(path), "--out", str(out), "--seed", "11"]) == 0
            blobs.append((out / "report.json").read_bytes())
        os.environ.pop("GSPEC_THREADS")
        json.loads(blobs[0])
        same[name] = blobs[0] == blobs[1]
    ok = all(same.values())
    verdict(9, ok, " ".join(f"{k}={'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok
