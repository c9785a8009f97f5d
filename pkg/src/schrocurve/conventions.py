"""Transform conventions used by every module.

All Fourier-analytic constants live here so that the quantization, norm,
and noise code cannot drift apart.  The conventions are:

    forward:   (F f)(xi) = integral exp(-i x.xi) f(x) dx
    inverse:   f(x) = (2 pi)^{-d} integral exp(+i x.xi) (F f)(xi) dxi

On the truncated domain [-L, L)^d with n points per axis the forward
integral is the rectangle rule with weight h = 2L/n per axis and the
inverse uses the frequency spacing dxi = pi/L per axis.  Frequencies are
xi_k = pi k / L for k in [-n/2, n/2).  With these weights the discrete
round trip is exact, grid Parseval reads

    ||f||_{L2}^2 = (2 pi)^{-d} ||F f||_{L2}^2,

and Fourier multipliers act exactly on plane waves at grid frequencies.
"""

from functools import lru_cache

import numpy as np

FOURIER_SIGN = -1  # sign of the exponent in the forward transform
INVERSE_PREFACTOR_EXPONENT = -1  # inverse carries (2*pi)^(d * this)


def spacing(n: int, half_width: float) -> float:
    """Spatial grid step h = 2L/n."""
    return 2.0 * half_width / n


def freq_spacing(half_width: float) -> float:
    """Frequency grid step dxi = pi/L."""
    return np.pi / half_width


@lru_cache(maxsize=64)
def axis_points(n: int, half_width: float) -> np.ndarray:
    """Spatial nodes -L + m h, m = 0..n-1 (ascending)."""
    h = spacing(n, half_width)
    return -half_width + h * np.arange(n)


@lru_cache(maxsize=64)
def axis_freqs_fft_order(n: int, half_width: float) -> np.ndarray:
    """Frequencies xi_k = pi k / L in numpy fft bin order."""
    k = np.fft.fftfreq(n, d=1.0 / n)  # 0, 1, ..., n/2-1, -n/2, ..., -1
    return freq_spacing(half_width) * k


def bracket(v) -> np.ndarray:
    """Japanese bracket <v> = sqrt(1 + v^2), elementwise."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(1.0 + v * v)


def bracket_radial(*axes: np.ndarray) -> np.ndarray:
    """<x> on the tensor grid spanned by the given per-axis coordinates."""
    sq = 0.0
    for i, a in enumerate(axes):
        shape = [1] * len(axes)
        shape[i] = a.size
        sq = sq + (a * a).reshape(shape)
    return np.sqrt(1.0 + sq)
