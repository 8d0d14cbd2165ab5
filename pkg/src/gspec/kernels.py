"""Hot loops with a compiled backend and a numpy fallback.

The Cython extension ``gspec._kernels`` is used when it was built; otherwise,
or when ``GSPEC_PURE_PYTHON=1`` is set, ``gspec._kernels_py`` is used. Both
backends expose the same three primitives and the wrappers below only deal
with shapes and dtypes.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("GSPEC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"


def _offsets(shape, out_shape):
    """Flat offsets in an array of ``out_shape`` for every index of ``shape``."""
    strides = np.cumprod((1,) + tuple(out_shape[:0:-1]))[::-1]
    grids = np.indices(shape).reshape(len(shape), -1)
    return np.ascontiguousarray((grids * strides[:, None]).sum(axis=0), dtype=np.int_)


def direct_convolve(a, b, impl=None):
    """Full linear convolution of two real arrays by explicit summation.

    The output has shape ``a.shape + b.shape - 1``. Zero entries of ``a`` are
    skipped, so sparse supports are cheap. No FFT is involved: products of
    nonnegative inputs stay exactly nonnegative.
    """
    impl = impl or _impl
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != b.ndim:
        raise ValueError("dimension mismatch")
    out_shape = tuple(sa + sb - 1 for sa, sb in zip(a.shape, b.shape))
    out = np.zeros(int(np.prod(out_shape)))
    impl.scatter_products(
        np.ascontiguousarray(a.ravel()),
        _offsets(a.shape, out_shape),
        np.ascontiguousarray(b.ravel()),
        _offsets(b.shape, out_shape),
        out,
    )
    return out.reshape(out_shape)


def minkowski_sum(mask_a, mask_b, impl=None):
    """Index-set Minkowski sum of two boolean masks (full, non-periodic)."""
    counts = direct_convolve(
        np.asarray(mask_a, dtype=float), np.asarray(mask_b, dtype=float), impl
    )
    return counts > 0.5


def torus_lp_norms(coeffs, p, n_points=4096, impl=None):
    """L^p(T) norms of trigonometric polynomials sum_j c_j e^{2 pi i j t}.

    ``coeffs`` has shape (m, K): row i holds the coefficients of frequencies
    0..K-1 of polynomial i. Uniform ``n_points`` quadrature on [0, 1).
    """
    impl = impl or _impl
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    return np.asarray(
        impl.torus_lp_norms(
            np.ascontiguousarray(c.real), np.ascontiguousarray(c.imag), float(p), int(n_points)
        )
    )


def unwrap_phase(phase, mask, start, impl=None):
    """Unwrap ``phase`` by breadth-first search over the masked lattice.

    Starts at multi-index ``start`` and walks nearest-neighbour lattice edges
    inside ``mask``. Returns (unwrapped phase, reached mask), both shaped like
    ``phase``; unreached entries are 0.
    """
    impl = impl or _impl
    phase = np.asarray(phase, dtype=float)
    shape = phase.shape
    flat_start = int(np.ravel_multi_index(tuple(start), shape))
    out, seen = impl.unwrap_bfs(
        np.ascontiguousarray(phase.ravel()),
        np.ascontiguousarray(np.asarray(mask, dtype=np.uint8).ravel()),
        np.asarray(shape, dtype=np.int_),
        flat_start,
    )
    return np.asarray(out).reshape(shape), np.asarray(seen, dtype=bool).reshape(shape)
