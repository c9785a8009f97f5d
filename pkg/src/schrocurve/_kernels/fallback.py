"""Pure numpy implementation of the stepping kernels.

Same contracts as the compiled core (`_core.pyx`): arrays are complex128,
spatial factors are in natural grid order, frequency factors in numpy fft
bin order, and every function returns a fresh array (inputs untouched).
"""

import numpy as np

BACKEND = "fallback"


def multiplier_apply(u, mult):
    """IDFT(mult * DFT(u)) for a frequency multiplier in fft order."""
    return np.fft.ifftn(mult * np.fft.fftn(u))


def separable_apply(u, cxs, mxis):
    """Sum_p cxs[p] * IDFT(mxis[p] * DFT(u)).

    cxs: (P, *shape) spatial factors, mxis: (P, *shape) frequency factors.
    """
    uhat = np.fft.fftn(u)
    out = np.zeros_like(u)
    for cx, mxi in zip(cxs, mxis):
        out += cx * np.fft.ifftn(mxi * uhat)
    return out


def strang_run(u, exp_v_half, exp_kin, steps):
    """Strang split steps of du/dt = i(K(D) + V(x))u.

    exp_v_half = exp(i V dt/2) (natural order), exp_kin = exp(i K dt)
    (fft order).
    """
    u = u.copy()
    for _ in range(steps):
        u *= exp_v_half
        u = np.fft.ifftn(exp_kin * np.fft.fftn(u))
        u *= exp_v_half
    return u


def rk4_run(u, cxs, mxis, dt, steps):
    """Classical RK4 on du/dt = A(u), A = separable_apply(., cxs, mxis)."""
    u = u.copy()
    for _ in range(steps):
        k1 = separable_apply(u, cxs, mxis)
        k2 = separable_apply(u + 0.5 * dt * k1, cxs, mxis)
        k3 = separable_apply(u + 0.5 * dt * k2, cxs, mxis)
        k4 = separable_apply(u + dt * k3, cxs, mxis)
        u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u
