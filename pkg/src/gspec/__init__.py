"""Pseudo-spectral ground states of Fourier-multiplier equations and checks of their structure."""

__version__ = "0.1.0"

from .grid import Field, Grid, SpectralField, forward_transform, inverse_transform, make_grid  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "Field",
    "Grid",
    "SpectralField",
    "forward_transform",
    "inverse_transform",
    "make_grid",
    "__version__",
]
