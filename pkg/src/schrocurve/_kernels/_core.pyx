# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernels.

Self-contained radix-2 FFT (grid sizes are powers of two by contract)
plus fused time-step loops, so a whole evolve() runs without touching
the interpreter.  Contracts match `fallback.py`.
"""

import numpy as np

BACKEND = "compiled"

_plans = {}


def _plan(n):
    """Twiddle + bit-reversal tables for size n (power of two)."""
    p = _plans.get(n)
    if p is None:
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"kernel FFT needs a power-of-two size, got {n}")
        j = np.arange(n // 2)
        tw_f = np.ascontiguousarray(np.exp(-2j * np.pi * j / n))
        tw_i = np.ascontiguousarray(np.conj(tw_f))
        bits = n.bit_length() - 1
        rev = np.zeros(n, dtype=np.intp)
        for i in range(1, n):
            rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
        p = (tw_f, tw_i, np.ascontiguousarray(rev))
        _plans[n] = p
    return p


cdef void _fft1(double complex* a, Py_ssize_t n, const double complex* tw,
                const Py_ssize_t* rev, bint inverse) noexcept nogil:
    cdef Py_ssize_t i, j, k, le, le2, tstep, base
    cdef double complex t, u
    cdef double inv_n
    for i in range(n):
        j = rev[i]
        if j > i:
            t = a[i]; a[i] = a[j]; a[j] = t
    # first stage: all twiddles are 1
    for base in range(0, n, 2):
        t = a[base + 1]
        a[base + 1] = a[base] - t
        a[base] = a[base] + t
    le = 4
    while le <= n:
        le2 = le >> 1
        tstep = n // le
        base = 0
        while base < n:
            for k in range(le2):
                t = a[base + k + le2] * tw[k * tstep]
                u = a[base + k]
                a[base + k] = u + t
                a[base + k + le2] = u - t
            base += le
        le <<= 1
    if inverse:
        inv_n = 1.0 / n
        for i in range(n):
            a[i] = a[i] * inv_n


cdef void _transpose(const double complex* src, double complex* dst, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i0, j0, i, j, bs = 32
    if bs > n:
        bs = n
    i0 = 0
    while i0 < n:
        j0 = 0
        while j0 < n:
            for i in range(i0, i0 + bs):
                for j in range(j0, j0 + bs):
                    dst[j * n + i] = src[i * n + j]
            j0 += bs
        i0 += bs


cdef void _fftn(double complex* a, Py_ssize_t d, Py_ssize_t n,
                const double complex* tw, const Py_ssize_t* rev,
                double complex* scratch, bint inverse) noexcept nogil:
    # scratch: length n*n when d == 2 (transpose buffer), unused for d == 1
    cdef Py_ssize_t r
    if d == 1:
        _fft1(a, n, tw, rev, inverse)
        return
    for r in range(n):
        _fft1(a + r * n, n, tw, rev, inverse)
    _transpose(a, scratch, n)
    for r in range(n):
        _fft1(scratch + r * n, n, tw, rev, inverse)
    _transpose(scratch, a, n)


cdef inline void _sep_apply(const double complex* src, double complex* out,
                            const double complex* cxs, const double complex* mxis,
                            Py_ssize_t nterms, double complex* uh, double complex* tmp,
                            Py_ssize_t d, Py_ssize_t n, Py_ssize_t size,
                            const double complex* twf, const double complex* twi,
                            const Py_ssize_t* rev, double complex* col) noexcept nogil:
    cdef Py_ssize_t p, i
    for i in range(size):
        uh[i] = src[i]
    _fftn(uh, d, n, twf, rev, col, 0)
    for i in range(size):
        out[i] = 0
    for p in range(nterms):
        for i in range(size):
            tmp[i] = mxis[p * size + i] * uh[i]
        _fftn(tmp, d, n, twi, rev, col, 1)
        for i in range(size):
            out[i] = out[i] + cxs[p * size + i] * tmp[i]


def _as_c(arr):
    return np.ascontiguousarray(arr, dtype=np.complex128)


def multiplier_apply(u, mult):
    """IDFT(mult * DFT(u)) for a frequency multiplier in fft order."""
    shape = u.shape
    cdef Py_ssize_t d = u.ndim, n = shape[0]
    twf, twi, rev = _plan(n)
    out = _as_c(u).ravel().copy()
    m = _as_c(mult).ravel()
    colbuf = np.empty(n * n if d == 2 else 1, dtype=np.complex128)
    cdef double complex[::1] a = out, mv = m, col = colbuf
    cdef double complex[::1] tf = twf, ti = twi
    cdef Py_ssize_t[::1] rv = rev
    cdef Py_ssize_t i, size = out.size
    with nogil:
        _fftn(&a[0], d, n, &tf[0], &rv[0], &col[0], 0)
        for i in range(size):
            a[i] = a[i] * mv[i]
        _fftn(&a[0], d, n, &ti[0], &rv[0], &col[0], 1)
    return out.reshape(shape)


def separable_apply(u, cxs, mxis):
    """Sum_p cxs[p] * IDFT(mxis[p] * DFT(u))."""
    shape = u.shape
    cdef Py_ssize_t d = u.ndim, n = shape[0]
    twf, twi, rev = _plan(n)
    src = _as_c(u).ravel()
    cstack = _as_c(cxs).reshape(len(cxs), -1)
    mstack = _as_c(mxis).reshape(len(mxis), -1)
    cdef Py_ssize_t nterms = cstack.shape[0], size = src.size
    out = np.empty(size, dtype=np.complex128)
    uh = np.empty(size, dtype=np.complex128)
    tmp = np.empty(size, dtype=np.complex128)
    colbuf = np.empty(n * n if d == 2 else 1, dtype=np.complex128)
    cdef double complex[::1] sv = src, ov = out, uhv = uh, tv = tmp, col = colbuf
    cdef double complex[:, ::1] cv = cstack, mv = mstack
    cdef double complex[::1] tf = twf, ti = twi
    cdef Py_ssize_t[::1] rv = rev
    with nogil:
        _sep_apply(&sv[0], &ov[0], &cv[0, 0], &mv[0, 0], nterms, &uhv[0], &tv[0],
                   d, n, size, &tf[0], &ti[0], &rv[0], &col[0])
    return out.reshape(shape)


def strang_run(u, exp_v_half, exp_kin, steps):
    """Strang split steps of du/dt = i(K(D) + V(x))u."""
    shape = u.shape
    cdef Py_ssize_t d = u.ndim, n = shape[0]
    twf, twi, rev = _plan(n)
    out = _as_c(u).ravel().copy()
    vh = _as_c(exp_v_half).ravel()
    kin = _as_c(exp_kin).ravel()
    colbuf = np.empty(n * n if d == 2 else 1, dtype=np.complex128)
    cdef double complex[::1] a = out, vv = vh, kv = kin, col = colbuf
    cdef double complex[::1] tf = twf, ti = twi
    cdef Py_ssize_t[::1] rv = rev
    cdef Py_ssize_t i, s, size = out.size, nsteps = steps
    with nogil:
        for s in range(nsteps):
            for i in range(size):
                a[i] = a[i] * vv[i]
            _fftn(&a[0], d, n, &tf[0], &rv[0], &col[0], 0)
            for i in range(size):
                a[i] = a[i] * kv[i]
            _fftn(&a[0], d, n, &ti[0], &rv[0], &col[0], 1)
            for i in range(size):
                a[i] = a[i] * vv[i]
    return out.reshape(shape)


def rk4_run(u, cxs, mxis, dt, steps):
    """Classical RK4 on du/dt = A(u), A = separable_apply(., cxs, mxis)."""
    shape = u.shape
    cdef Py_ssize_t d = u.ndim, n = shape[0]
    twf, twi, rev = _plan(n)
    out = _as_c(u).ravel().copy()
    cstack = _as_c(cxs).reshape(len(cxs), -1)
    mstack = _as_c(mxis).reshape(len(mxis), -1)
    cdef Py_ssize_t nterms = cstack.shape[0], size = out.size
    k1 = np.empty(size, dtype=np.complex128)
    k2 = np.empty(size, dtype=np.complex128)
    k3 = np.empty(size, dtype=np.complex128)
    k4 = np.empty(size, dtype=np.complex128)
    y = np.empty(size, dtype=np.complex128)
    uh = np.empty(size, dtype=np.complex128)
    tmp = np.empty(size, dtype=np.complex128)
    colbuf = np.empty(n * n if d == 2 else 1, dtype=np.complex128)
    cdef double complex[::1] a = out, k1v = k1, k2v = k2, k3v = k3, k4v = k4
    cdef double complex[::1] yv = y, uhv = uh, tv = tmp, col = colbuf
    cdef double complex[:, ::1] cv = cstack, mv = mstack
    cdef double complex[::1] tf = twf, ti = twi
    cdef Py_ssize_t[::1] rv = rev
    cdef Py_ssize_t i, s, nsteps = steps
    cdef double h = dt
    with nogil:
        for s in range(nsteps):
            _sep_apply(&a[0], &k1v[0], &cv[0, 0], &mv[0, 0], nterms, &uhv[0], &tv[0],
                       d, n, size, &tf[0], &ti[0], &rv[0], &col[0])
            for i in range(size):
                yv[i] = a[i] + 0.5 * h * k1v[i]
            _sep_apply(&yv[0], &k2v[0], &cv[0, 0], &mv[0, 0], nterms, &uhv[0], &tv[0],
                       d, n, size, &tf[0], &ti[0], &rv[0], &col[0])
            for i in range(size):
                yv[i] = a[i] + 0.5 * h * k2v[i]
            _sep_apply(&yv[0], &k3v[0], &cv[0, 0], &mv[0, 0], nterms, &uhv[0], &tv[0],
                       d, n, size, &tf[0], &ti[0], &rv[0], &col[0])
            for i in range(size):
                yv[i] = a[i] + h * k3v[i]
            _sep_apply(&yv[0], &k4v[0], &cv[0, 0], &mv[0, 0], nterms, &uhv[0], &tv[0],
                       d, n, size, &tf[0], &ti[0], &rv[0], &col[0])
            for i in range(size):
                a[i] = a[i] + (h / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
    return out.reshape(shape)
