"""Discrete-time quantum histories on finite-dimensional Hilbert spaces."""
from ._accel import backend_name

__version__ = "0.1.0"

from . import ctp, geomphase, hilbert, histories, phasespace, stochlimit, wigner  # noqa: E402

__all__ = [
    "backend_name",
    "ctp",
    "geomphase",
    "hilbert",
    "histories",
    "phasespace",
    "stochlimit",
    "wigner",
]
