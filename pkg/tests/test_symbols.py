import math

import numpy as np
import pytest

from gspec.grid import make_grid
from gspec.symbols import (
    bessel,
    bilaplacian,
    boosted_halfwave,
    builtin_symbol,
    check_assumptions,
    check_sector,
    fractional_laplacian,
    polynomial,
)


def test_values():
    assert fractional_laplacian(1)(np.array([1 / (2 * math.pi)])) == pytest.approx(1.0, rel=1e-15)
    assert bilaplacian(-1)(np.array([0.0])) == 0.0
    assert boosted_halfwave(0.5)(np.array([1.0])) == pytest.approx(math.pi, rel=1e-15)
    assert bessel(0.5)(np.array([0.0])) == 1.0


def test_bilaplacian_vertex():
    mu = -1.0
    sym = bilaplacian(mu)
    t = np.linspace(0, 0.1, 200001)
    vals = sym(np.sqrt(t)[:, None])
    # 16 pi^4 t^2 + 4 pi^2 mu t is minimal at t = -mu / (8 pi^2) with value -mu^2 / 4
    assert vals.min() == pytest.approx(-(mu**2) / 4, rel=1e-9)
    assert vals.min() < 0


def test_flags_and_errors():
    assert fractional_laplacian(1).is_even and bessel(2).is_even and bilaplacian(0).is_even
    assert not boosted_halfwave(0.5).is_even
    assert boosted_halfwave(0.0).is_even
    with pytest.raises(ValueError):
        fractional_laplacian(0)
    with pytest.raises(ValueError):
        boosted_halfwave(1.0)
    with pytest.raises(ValueError):
        builtin_symbol("nope")
    with pytest.raises(ValueError):
        builtin_symbol("bessel", mu=1)
    with pytest.raises(ValueError):
        polynomial([])


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_evenness_on_lattice(dim):
    g = make_grid(dim, 16, 3.0)
    for sym in (fractional_laplacian(0.5, dim), fractional_laplacian(1, dim), bessel(1.5, dim), bilaplacian(-2, dim)):
        xi = np.asarray(g.xi_mesh)
        pv = sym(xi)
        assert np.max(np.abs(pv - sym(-xi))) <= 1e-12 * np.max(np.abs(pv))


@pytest.mark.parametrize(
    "sym,dim",
    [(bilaplacian(-3.0, 2), 2), (bessel(2, 3), 3), (fractional_laplacian(2, 1), 1), (bessel(1, 2), 2)],
)
def test_polynomial_coefficients_match_evaluator(sym, dim):
    assert sym.is_polynomial
    g = make_grid(dim, 16, 2.0)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, g.points, size=(100, dim))
    xi = g.xi_axis[idx]
    direct = sym(xi)
    from gspec.symbols import eval_polynomial

    via = np.real(eval_polynomial(sym.coefficients, xi))
    assert np.max(np.abs(direct - via)) <= 1e-12 * np.max(np.abs(direct))


def test_polynomial_constructor():
    p = polynomial([((2,), 3.0), ((1,), 1.0)])
    assert p.order_2s == 2 and not p.is_even
    assert p(np.array([2.0])) == 14.0
    q = polynomial({(2, 0): 1.0, (0, 2): 1.0})
    assert q.is_even and q(np.array([1.0, 2.0])) == 5.0


@pytest.mark.parametrize("s", [0.5, 1, 2])
def test_assumptions_homogeneous(s):
    rep = check_assumptions(fractional_laplacian(s), make_grid(1, 128, 20.0))
    ref = (4 * math.pi**2) ** s
    assert rep.a_lower == pytest.approx(ref, rel=1e-9)
    assert rep.a_upper == pytest.approx(ref, rel=1e-9)
    assert abs(rep.c_offset) < 1e-9 * ref
    assert rep.ellipticity_ok and rep.even_ok and rep.bounds_ok


def test_assumptions_bilaplacian_negative_min():
    rep = check_assumptions(bilaplacian(-1), make_grid(1, 128, 20.0))
    assert rep.ellipticity_ok and rep.ellipticity_R > 0
    assert rep.min_p < 0


def test_assumptions_boosted_halfwave():
    rep = check_assumptions(boosted_halfwave(0.5), make_grid(1, 128, 20.0))
    assert rep.a_lower == pytest.approx(math.pi, rel=1e-9)
    assert rep.a_upper == pytest.approx(3 * math.pi, rel=1e-9)
    assert not rep.even_ok


def test_sector_laplacian_shift():
    g = make_grid(1, 64, 10.0)
    v = check_sector(fractional_laplacian(1), 0.1j, g)
    # Re (xi + 0.1 i)^2 = xi^2 - 0.01
    assert v.a1 == pytest.approx(4 * math.pi**2, rel=1e-12)
    assert v.b1 == pytest.approx(0.04 * math.pi**2, rel=1e-9)
    assert v.ok


def test_sector_constant_and_quartic():
    g = make_grid(1, 64, 10.0)
    v = check_sector(polynomial([((0,), 2.0)]), 0.3j, g, order_2s=2.0)
    assert v.theta == 0.0 and v.sector_ok
    q = polynomial([((4,), 16 * math.pi**4), ((2,), 4 * math.pi**2)])
    assert check_sector(q, 0.05j, g).ok


def test_sector_requires_polynomial():
    with pytest.raises(ValueError):
        check_sector(boosted_halfwave(0.2), 0.1j, make_grid(1, 16, 4.0))
    with pytest.raises(ValueError):
        check_sector(fractional_laplacian(1), 0.5j, make_grid(1, 16, 4.0), delta=0.1)
