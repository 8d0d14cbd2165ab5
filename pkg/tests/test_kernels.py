import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gspec import _kernels_py, kernels

BACKENDS = [_kernels_py]
try:
    from gspec import _kernels as _compiled

    BACKENDS.append(_compiled)
except ImportError:  # extension not built
    pass


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def impl(request):
    return request.param


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31))
def test_direct_convolve_matches_scipy(dim, seed):
    import scipy.signal as ssig

    rng = np.random.default_rng(seed)
    a = rng.standard_normal(tuple(rng.integers(1, 7, dim)))
    b = rng.standard_normal(tuple(rng.integers(1, 7, dim)))
    a[rng.random(a.shape) < 0.3] = 0.0
    ref = ssig.convolve(a, b, mode="full", method="direct")
    for m in BACKENDS:
        assert np.allclose(kernels.direct_convolve(a, b, impl=m), ref, atol=1e-12)


def test_minkowski_intervals(impl):
    a = np.zeros(20, dtype=bool)
    b = np.zeros(20, dtype=bool)
    a[2:5] = True
    b[10:12] = True
    m = kernels.minkowski_sum(a, b, impl=impl)
    assert np.flatnonzero(m).tolist() == list(range(12, 16))


def test_torus_norms_match_dense_quadrature(impl):
    rng = np.random.default_rng(5)
    c = rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))
    t = np.arange(4096) / 4096
    vals = c @ np.exp(2j * np.pi * np.outer(np.arange(5), t))
    for p in (2.0, 3.0, 4.5):
        ref = np.mean(np.abs(vals) ** p, axis=1) ** (1 / p)
        assert np.allclose(kernels.torus_lp_norms(c, p, impl=impl), ref, rtol=1e-12)


def test_torus_l2_is_coefficient_norm(impl):
    c = np.array([[1.0, -2.0, 0.5j]])
    assert kernels.torus_lp_norms(c, 2, impl=impl)[0] == pytest.approx(np.sqrt(1 + 4 + 0.25), rel=1e-13)


def test_unwrap_linear_ramp(impl):
    k = np.arange(-16, 16)
    true = 0.7 - 2 * np.pi * 1.5 * k / 8
    wrapped = np.angle(np.exp(1j * true))
    out, seen = kernels.unwrap_phase(wrapped, np.ones(32, bool), (16,), impl=impl)
    assert seen.all()
    assert np.allclose(out - out[16], true - true[16], atol=1e-12)


def test_unwrap_respects_mask_2d(impl):
    ph = np.zeros((6, 6))
    mask = np.zeros((6, 6), bool)
    mask[:2, :2] = True
    mask[4:, 4:] = True
    out, seen = kernels.unwrap_phase(ph, mask, (0, 0), impl=impl)
    assert seen[:2, :2].all() and not seen[4:, 4:].any()


def test_backends_agree_on_unwrap():
    rng = np.random.default_rng(9)
    ph = rng.uniform(-np.pi, np.pi, (12, 12))
    mask = rng.random((12, 12)) < 0.7
    mask[5, 5] = True
    results = [kernels.unwrap_phase(ph, mask, (5, 5), impl=m) for m in BACKENDS]
    for out, seen in results[1:]:
        assert np.array_equal(seen, results[0][1])
        assert np.allclose(out, results[0][0])


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
