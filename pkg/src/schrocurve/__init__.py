"""schrocurve: simulator and verification lab for semilinear stochastic
Schrodinger equations on asymptotically flat metrics."""

__version__ = "0.1.0"

from ._kernels import BACKEND_NAME as kernel_backend  # noqa: F401
from .grid import Field, Grid  # noqa: F401
