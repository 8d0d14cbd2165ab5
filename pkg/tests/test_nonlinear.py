import types

import numpy as np
import pytest

from gspec.grid import Field, SpectralField, forward_transform, make_grid
from gspec.nonlinear import (
    NonlinearProblem,
    NonlinearSolution,
    action,
    align,
    critical_sigma,
    decay_fit,
    equation_defect,
    gaussian_init,
    gradient_check,
    kinetic,
    linearized_defect,
    multi_start,
    omega_fullness,
    petviashvili_solve,
    petviashvili_step,
    potential,
    proportionality,
    sobolev_quotient,
    start_fields,
    verify_nonlinear,
)
from gspec.rearrangement import bullet
from gspec.report import ConvergenceError
from gspec.rng import random_bandlimited
from gspec.symbols import bessel, bilaplacian, boosted_halfwave, fractional_laplacian

from conftest import sech_soliton


@pytest.fixture(scope="module")
def sech():
    g = make_grid(1, 256, 40.0)
    prob = NonlinearProblem(fractional_laplacian(1.0), 1.0, 1, g)
    return prob, petviashvili_solve(prob, gaussian_init(g, 2.0))


def test_critical_sigma():
    assert critical_sigma(3, 1.0) == 2.0
    assert critical_sigma(1, 1.0) == np.inf
    assert critical_sigma(2, 1.0) == np.inf
    assert critical_sigma(3, 0.5) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "n,sym,lam,sigma",
    [
        (3, fractional_laplacian(1.0, dim=3), 1.0, 2),
        (3, fractional_laplacian(1.0, dim=3), 1.0, 3),
        (1, fractional_laplacian(1.0), 0.0, 1),
        (1, bilaplacian(-4.0), 3.5, 1),
        (1, fractional_laplacian(1.0), 1.0, 0),
        (1, fractional_laplacian(1.0), 1.0, 1.5),
    ],
)
def test_problem_rejects_inadmissible(n, sym, lam, sigma):
    with pytest.raises(ValueError):
        NonlinearProblem(sym, lam, sigma, make_grid(n, 16 if n == 3 else 128, 80.0))


def test_sech_soliton(sech):
    prob, sol = sech
    g = prob.grid
    assert sol.residual < 1e-10
    ref = sech_soliton(g.x_axis)
    assert np.max(np.abs(sol.state.values - ref)) < 1e-8
    # closed forms: <Q,(P+1)Q> = ||Q||_4^4 = 16/3, action 4/3
    assert potential(sol.state, prob) == pytest.approx(16 / 3, rel=1e-10)
    assert kinetic(sol.state, prob) == pytest.approx(16 / 3, rel=1e-10)
    assert sol.action_value == pytest.approx(4 / 3, rel=1e-10)
    assert sol.sobolev_quotient == pytest.approx(np.sqrt(3 / 16), rel=1e-10)


def test_exact_soliton_is_a_fixed_point(sech):
    prob, _ = sech
    exact = prob.grid.sample(lambda x: sech_soliton(x[..., 0]))
    assert petviashvili_solve(prob, exact).iterations <= 3


def test_one_more_step_is_stationary(sech):
    prob, sol = sech
    F = forward_transform(sol.state)
    G, S = petviashvili_step(F, prob)
    assert S == pytest.approx(1.0, abs=1e-10)
    assert (G - F).l2_norm() < 1e-9


def test_translated_modulated_start(sech):
    prob, _ = sech
    g = prob.grid
    init = gaussian_init(g, 2.0, center=3.0) * np.exp(0.9j)
    sol = petviashvili_solve(prob, init)
    alpha, x0, aligned = align(sol.state)
    assert x0[0] == pytest.approx(3.0, abs=1e-6)
    assert np.max(np.abs(aligned.values - sech_soliton(g.x_axis))) < 1e-7
    rep = verify_nonlinear(sol, prob)
    assert rep.passed


def test_linearized_defect_predicts_residual(sech):
    prob, sol = sech
    g = prob.grid
    h = random_bandlimited(g, 3, band=20)
    errs = []
    for eps in (1e-2, 5e-3):
        pert = Field(g, sol.state.values + eps * h.values)
        diff = equation_defect(forward_transform(pert), prob) - equation_defect(forward_transform(sol.state), prob)
        pred = linearized_defect(sol.state, h, prob) * eps
        errs.append((diff - pred).l2_norm())
    # second-order remainder: halving eps quarters the error
    assert errs[1] / errs[0] == pytest.approx(0.25, rel=0.05)


def test_quotient_maximized_over_gaussians(sech):
    prob, sol = sech
    g = prob.grid
    for w in np.geomspace(0.3, 4.0, 12):
        assert sobolev_quotient(gaussian_init(g, w), prob) < sol.sobolev_quotient
    for seed in range(5):
        assert sobolev_quotient(random_bandlimited(g, seed, band=30), prob) < sol.sobolev_quotient


def test_quotient_scale_invariant(sech):
    prob, sol = sech
    assert sobolev_quotient(sol.state * 3.7j, prob) == pytest.approx(sol.sobolev_quotient, rel=1e-12)
    with pytest.raises(ValueError):
        sobolev_quotient(prob.grid.zeros(), prob)


def test_action_at_critical_point_identity(sech):
    prob, sol = sech
    s = prob.sigma
    assert action(sol.state, prob) == pytest.approx(s / (2 * s + 2) * potential(sol.state, prob), rel=1e-10)


def test_rearranged_start_reaches_same_action(sech):
    prob, sol = sech
    g = prob.grid
    init = gaussian_init(g, 1.5, center=-2.0) * np.exp(0.3j) + random_bandlimited(g, 5, band=8) * 0.05
    a = petviashvili_solve(prob, init)
    b = petviashvili_solve(prob, bullet(init))
    assert a.action_value == pytest.approx(b.action_value, rel=1e-9)


def test_multi_start_ties_and_order():
    g = make_grid(1, 256, 60.0)
    prob = NonlinearProblem(bessel(1.0), 1.0, 1, g)
    best, recs = multi_start(prob, seeds=(5, 3, 1, 2, 4))
    assert [r.seed for r in recs] == [1, 2, 3, 4, 5]
    acts = [r.action for r in recs if r.converged]
    assert len(acts) == 5
    assert max(acts) - min(acts) < 1e-9
    assert best.action_value == min(acts)
    best2, _ = multi_start(prob, seeds=(1, 2, 3, 4, 5), workers=3)
    assert best2.action_value == best.action_value


def test_start_fields_deterministic():
    g = make_grid(1, 64, 20.0)
    a, b = start_fields(g, [1, 2, 3]), start_fields(g, [1, 2, 3])
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    last = a[-1].values
    assert np.max(np.abs(last - last[::-1])) > 0.1  # odd-perturbed start


def test_bessel_ground_state_closed_form():
    # (1 - d^2) Q + Q - Q^3 = 0 with (1 + 4 pi^2 xi^2) symbol: Q = 2 sech(sqrt2 x)
    g = make_grid(1, 512, 60.0)
    prob = NonlinearProblem(bessel(1.0), 1.0, 1, g)
    sol = petviashvili_solve(prob, gaussian_init(g, 2.0))
    assert np.max(np.abs(sol.state.values - 2 / np.cosh(np.sqrt(2) * g.x_axis))) < 1e-8
    rep = verify_nonlinear(sol, prob)
    assert rep.passed
    assert rep.quantities["decay_rate"] == pytest.approx(np.sqrt(2), rel=0.02)


def test_negative_controls(sech):
    prob, sol = sech
    g = prob.grid
    scaled = NonlinearSolution(sol.state * 1.01, 0.0, 0, 0.0, 0.0)
    assert verify_nonlinear(scaled, prob).verdict("pohozaev") == "fail"
    q = sol.state.values
    two = Field(g, np.roll(q, 40) + 1j * np.roll(q, -40))
    rep = verify_nonlinear(NonlinearSolution(two, 0.0, 0, 0.0, 0.0), prob)
    assert rep.verdict("phase_fit") == "fail"
    assert rep.verdict("alignment") == "fail"
    assert rep.verdict("real_imag_proportional") == "fail"


def test_non_even_symbol_skips_symmetry():
    g = make_grid(1, 256, 60.0)
    prob = NonlinearProblem(boosted_halfwave(0.5), 1.0, 1, g)
    sol = petviashvili_solve(prob, gaussian_init(g, 2.0))
    rep = verify_nonlinear(sol, prob)
    for name in ("realness", "evenness", "real_imag_proportional"):
        assert rep.verdict(name) == "skipped"
    assert rep.verdict("phase_fit") == "pass"
    assert rep.verdict("pohozaev") == "pass"
    # algebraic tail of a non-smooth symbol
    assert rep.quantities["decay_profile"] == "subexponential"


def test_two_dimensional_solution():
    g = make_grid(2, 64, 24.0)
    prob = NonlinearProblem(fractional_laplacian(1.0, dim=2), 1.0, 1, g)
    sol = petviashvili_solve(prob, gaussian_init(g, 1.5))
    rep = verify_nonlinear(sol, prob)
    assert rep.passed
    assert rep.quantities["decay_rate"] > 0


def test_non_convergence_and_bad_init(sech):
    prob, _ = sech
    with pytest.raises(ConvergenceError) as exc:
        petviashvili_solve(prob, gaussian_init(prob.grid, 2.0), max_iters=2)
    assert len(exc.value.history) == 3
    with pytest.raises(ValueError):
        petviashvili_solve(prob, prob.grid.zeros())
    with pytest.raises(ValueError):
        petviashvili_solve(prob, gaussian_init(make_grid(1, 64, 40.0), 2.0))


# -- decay -------------------------------------------------------------------


def test_decay_of_exponential_and_gaussian():
    g = make_grid(1, 512, 60.0)
    e = g.sample(lambda x: np.exp(-0.8 * np.abs(x[..., 0])))
    fit = decay_fit(e, window=(3, 20))
    assert fit.rate == pytest.approx(0.8, rel=1e-6) and fit.confirmed and fit.profile == "exponential"
    gfit = decay_fit(gaussian_init(make_grid(1, 256, 40.0), 3.0))
    assert gfit.profile == "superexponential"
    slow = g.sample(lambda x: 1 / (1 + x[..., 0] ** 2))
    sfit = decay_fit(slow, window=(3, 25))
    assert sfit.profile == "subexponential" and not sfit.confirmed


def test_decay_sech_window(sech):
    _, sol = sech
    fit = decay_fit(sol.state, window=(5, 15))
    assert fit.rate == pytest.approx(1.0, abs=0.01)


def test_decay_errors():
    g = make_grid(1, 64, 20.0)
    with pytest.raises(ValueError):
        decay_fit(g.zeros())
    with pytest.raises(ValueError):
        decay_fit(gaussian_init(g, 2.0), window=(1, 9.5))


def test_decay_oscillatory_envelope():
    g = make_grid(1, 1024, 100.0)
    f = g.sample(lambda x: np.exp(-0.3 * np.abs(x[..., 0])) * (1.5 + np.cos(2 * x[..., 0])))
    fit = decay_fit(f, window=(5, 40))
    assert fit.envelope
    assert fit.rate == pytest.approx(0.3, rel=0.02)


# -- fullness and splitting --------------------------------------------------


def test_omega_fullness_cases():
    g = make_grid(1, 32, 8.0)
    full = SpectralField(g, np.exp(-np.abs(g.xi_axis)))
    assert omega_fullness(full) == (1.0, "pass")
    tails = SpectralField(g, np.exp(-40 * g.xi_axis**2))
    frac, verdict = omega_fullness(tails)
    assert frac < 1 and verdict == "inconclusive"
    c = np.exp(-np.abs(g.xi_axis))
    c[g.points // 2 + 3] = 0
    assert omega_fullness(SpectralField(g, c))[1] == "fail"


def test_proportionality_cases(sech):
    _, sol = sech
    assert proportionality(sol.state * np.exp(0.4j))[0]
    assert proportionality(sol.state)[0]
    x = sol.state.grid.x_axis
    bad = Field(sol.state.grid, sol.state.values * (1 + 1j * np.tanh(x)))
    ok, spread = proportionality(bad)
    assert not ok and spread > 0.1


# -- gradient ----------------------------------------------------------------


def test_gradient_at_solution(sech):
    prob, sol = sech
    for deriv, fd, rel in gradient_check(sol, prob):
        assert rel < 1e-6


def test_gradient_matches_equation_defect_away_from_solution():
    g = make_grid(1, 64, 20.0)
    prob = NonlinearProblem(fractional_laplacian(1.0), 1.0, 1, g)
    Q = gaussian_init(g, 1.5, amplitude=1.2)
    out = gradient_check(types.SimpleNamespace(state=Q), prob, seeds=(4,))
    deriv, fd, rel = out[0]
    h = random_bandlimited(g, 4, stream=7)
    h = h * (1 / np.sqrt(np.sum(np.abs(h.values) ** 2) * g.cell_volume))
    pair = np.real(np.vdot(forward_transform(h).coeffs, equation_defect(forward_transform(Q), prob).coeffs))
    assert deriv == pytest.approx(pair * g.dual_volume, rel=1e-10)
    assert rel < 1e-15
