"""Seeded counter-based random streams.

Every random draw in the package goes through :func:`make_rng`, which maps a
(seed, stream) pair to an independent Philox generator. The same pair gives
the same numbers on every platform.
"""

import numpy as np


def make_rng(seed, stream=0):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def random_bandlimited(grid, seed, band=None, stream=0):
    """Random field whose transform vanishes outside ``|k| <= band`` per axis.

    Coefficients are complex normal on the retained band. ``band`` defaults to
    a quarter of the lattice.
    """
    from .grid import SpectralField, inverse_transform

    rng = make_rng(seed, stream)
    band = grid.points // 4 if band is None else int(band)
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    keep = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        k = grid.k_axis.reshape((-1,) + (1,) * (grid.dim - 1 - ax))
        keep &= np.abs(k) <= band
    return inverse_transform(SpectralField(grid, np.where(keep, c, 0.0)))
