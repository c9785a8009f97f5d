"""Symbols a(x, xi), the operator coefficients built from metric data, and
numerical certification of the symbol-class estimates and ellipticity.

A symbol of order (m, mu) is a smooth function on R^d x R^d whose
derivatives obey

    |d_xi^alpha d_x^beta a| <= C_{alpha,beta} <x>^{m-|beta|} <xi>^{mu-|alpha|}.

`check_symbol_estimates` probes that bound on dyadic shells: for each
(alpha, beta) it records the per-shell supremum of the normalized
quantity |d a| <x>^{|beta|-m} <xi>^{|alpha|-mu} and passes when the
suprema stabilize across shells instead of growing.

Evaluation convention: `eval(x, xi)` takes arrays of shape (..., d) and
returns shape (...).  Separable symbols additionally carry terms
(c_p(x), m_p(xi)) with a(x, xi) = sum_p c_p(x) m_p(xi); every shipped
family is separable, which is what makes quantization FFT-fast.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .conventions import bracket

PROBE_SHELLS = (1.0, 2.0, 4.0, 8.0, 16.0)
FD_STEP_SCALE = 1e-4
STABLE_FACTOR = 4.0  # largest-shell sup may exceed the shell median by this much


def _fd_step_base(total_order: int) -> float:
    """Relative step for nested central differences.

    1e-4 is near-optimal for a single Richardson-extrapolated first
    derivative; nested higher derivatives amplify cancellation noise by
    1/h per level, so the step must grow with the total order.
    """
    if total_order <= 1:
        return FD_STEP_SCALE
    return float(np.finfo(float).eps ** (1.0 / (2 * total_order + 3)))


@dataclass(frozen=True)
class SymbolOrder:
    m: float
    mu: float

    def __post_init__(self):
        if not (np.isfinite(self.m) and np.isfinite(self.mu)):
            raise ValueError("symbol orders must be finite")

    def __add__(self, other: "SymbolOrder") -> "SymbolOrder":
        return SymbolOrder(self.m + other.m, self.mu + other.mu)


@dataclass
class Symbol:
    """A symbol with declared order and optional structure hints."""

    eval: callable  # (x (...,d), xi (...,d)) -> complex (...)
    order: SymbolOrder
    name: str = "symbol"
    separable: list | None = None  # [(c_p(x), m_p(xi)), ...]
    x_only: bool = False
    xi_only: bool = False
    is_zero: bool = False
    derivative_oracle: callable | None = None  # (alpha, beta, x, xi) -> complex

    def __call__(self, x, xi):
        return self.eval(x, xi)


def symbol_product(p: Symbol, q: Symbol, name: str | None = None) -> Symbol:
    """Pointwise product; orders add."""
    return Symbol(
        eval=lambda x, xi: p.eval(x, xi) * q.eval(x, xi),
        order=p.order + q.order,
        name=name or f"{p.name}*{q.name}",
    )


def constant_symbol(c: complex = 1.0) -> Symbol:
    return Symbol(
        eval=lambda x, xi: np.full(np.broadcast(x[..., 0], xi[..., 0]).shape, c, dtype=complex),
        order=SymbolOrder(0.0, 0.0),
        name=f"const({c})",
        separable=[(lambda x: np.full(x.shape[:-1], c, dtype=complex),
                    lambda xi: np.ones(xi.shape[:-1], dtype=complex))],
        x_only=True,
        xi_only=True,
        is_zero=(c == 0),
    )


def zero_symbol() -> Symbol:
    s = constant_symbol(0.0)
    s.name = "zero"
    s.is_zero = True
    return s


# -- metrics -------------------------------------------------------------------

class MetricCoefficients:
    """Symmetric, positive-definite coefficient matrix a_jl(x).

    coeff(j, l) evaluates a_jl on points (..., d); grad(axis, j, l) its
    x_axis-derivative (analytic for the shipped families, finite
    differences otherwise).  flat_at_infinity_rate is the decay exponent
    of a_jl - delta_jl (np.inf for superpolynomial decay).
    """

    def __init__(self, d: int, coeff, grad=None, flat_at_infinity_rate: float = np.inf,
                 name: str = "metric", is_constant: bool = False):
        if not flat_at_infinity_rate > 0:
            raise ValueError("flat_at_infinity_rate must be positive")
        self.d = d
        self._coeff = coeff
        self._grad = grad
        self.flat_at_infinity_rate = flat_at_infinity_rate
        self.name = name
        self.is_constant = is_constant
        self._check_symmetry()

    def coeff(self, j: int, l: int):
        return self._coeff(j, l)

    def grad(self, axis: int, j: int, l: int):
        if self._grad is not None:
            return self._grad(axis, j, l)

        fn = self._coeff(j, l)

        def fd(x, _fn=fn, _axis=axis):
            h = FD_STEP_SCALE * bracket(np.linalg.norm(x, axis=-1))
            dx = np.zeros_like(x)
            dx[..., _axis] = h
            d1 = (_fn(x + dx) - _fn(x - dx)) / (2 * h)
            d2 = (_fn(x + dx / 2) - _fn(x - dx / 2)) / h
            return (4 * d2 - d1) / 3
        return fd

    def matrix_at(self, x: np.ndarray) -> np.ndarray:
        """a_jl stacked to shape (..., d, d)."""
        rows = [[self._coeff(j, l)(x) for l in range(self.d)] for j in range(self.d)]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def _check_symmetry(self):
        rng = np.random.default_rng(0)
        x = rng.normal(scale=3.0, size=(32, self.d))
        for j in range(self.d):
            for l in range(j + 1, self.d):
                ajl, alj = self._coeff(j, l)(x), self._coeff(l, j)(x)
                if not np.allclose(ajl, alj, rtol=1e-12, atol=1e-12):
                    raise ValueError(f"metric is not symmetric: a[{j}][{l}] != a[{l}][{j}]")


def _bump_metric(d, eps, direction, g, gname, rate):
    v = np.zeros(d)
    v[0] = 1.0
    if direction is not None:
        v = np.asarray(direction, dtype=float)
        v = v / np.linalg.norm(v)

    def coeff(j, l):
        def fn(x, _j=j, _l=l):
            s = np.sum(x * x, axis=-1)
            out = eps * g(s) * v[_j] * v[_l]
            if _j == _l:
                out = out + 1.0
            return out
        return fn

    def grad(axis, j, l):
        def fn(x, _a=axis, _j=j, _l=l):
            s = np.sum(x * x, axis=-1)
            return eps * _dg(g, s) * 2.0 * x[..., _a] * v[_j] * v[_l]
        return fn

    return MetricCoefficients(d, coeff, grad, flat_at_infinity_rate=rate,
                              name=f"{gname}(eps={eps})")


def _dg(g, s):
    if g is _g_gauss:
        return -np.exp(-s)
    if g is _g_rational:
        return -1.0 / (1.0 + s) ** 2
    raise ValueError("unknown profile")


def _g_gauss(s):
    return np.exp(-s)


def _g_rational(s):
    return 1.0 / (1.0 + s)


def metric_flat(d: int) -> MetricCoefficients:
    def coeff(j, l):
        def fn(x, _j=j, _l=l):
            return np.full(x.shape[:-1], 1.0 if _j == _l else 0.0)
        return fn

    def grad(axis, j, l):
        def fn(x):
            return np.zeros(x.shape[:-1])
        return fn

    return MetricCoefficients(d, coeff, grad, name="flat", is_constant=True)


def metric_gauss_bump(d: int, eps: float = 0.5, direction=None) -> MetricCoefficients:
    """delta_jl + eps exp(-|x|^2) v_j v_l (superpolynomially flat at infinity)."""
    return _bump_metric(d, eps, direction, _g_gauss, "gauss_bump", np.inf)


def metric_rational_decay(d: int, eps: float = 0.5, direction=None) -> MetricCoefficients:
    """delta_jl + eps (1+|x|^2)^{-1} v_j v_l."""
    return _bump_metric(d, eps, direction, _g_rational, "rational_decay", 2.0)


METRIC_FAMILIES = {
    "flat": metric_flat,
    "gauss_bump": metric_gauss_bump,
    "rational_decay": metric_rational_decay,
}


# -- operator pieces -----------------------------------------------------------

def build_hamiltonian(metric: MetricCoefficients) -> Symbol:
    """a(x, xi) = -(1/2) sum_jl a_jl(x) xi_j xi_l, order (0, 2)."""
    d = metric.d

    def ev(x, xi):
        acc = 0.0
        for j in range(d):
            for l in range(d):
                acc = acc + metric.coeff(j, l)(x) * xi[..., j] * xi[..., l]
        return (-0.5 * acc).astype(complex)

    terms = []
    for j in range(d):
        for l in range(d):
            terms.append((
                lambda x, _j=j, _l=l: -0.5 * metric.coeff(_j, _l)(x).astype(complex),
                lambda xi, _j=j, _l=l: (xi[..., _j] * xi[..., _l]).astype(complex),
            ))
    return Symbol(eval=ev, order=SymbolOrder(0.0, 2.0), name=f"hamiltonian[{metric.name}]",
                  separable=terms, xi_only=metric.is_constant)


def build_lower_metric_term(metric: MetricCoefficients) -> Symbol:
    """a1(x, xi) = (i/2) sum_jl d_{x_j} a_jl(x) xi_l, order (-1, 1)."""
    d = metric.d
    if metric.is_constant:
        return zero_symbol()

    def ev(x, xi):
        acc = 0.0
        for j in range(d):
            for l in range(d):
                acc = acc + metric.grad(j, j, l)(x) * xi[..., l]
        return 0.5j * acc

    terms = []
    for j in range(d):
        for l in range(d):
            terms.append((
                lambda x, _j=j, _l=l: 0.5j * metric.grad(_j, _j, _l)(x),
                lambda xi, _l=l: xi[..., _l].astype(complex),
            ))
    return Symbol(eval=ev, order=SymbolOrder(-1.0, 1.0), name=f"lower_metric[{metric.name}]",
                  separable=terms)


def potential_harmonic_window(d: int, amp: float = 1.0, width: float = 2.0) -> Symbol:
    """Real potential amp |x|^2 exp(-|x|^2/width^2): a well near the origin,
    windowed so it stays bounded (order (0, 0))."""
    def cx(x):
        s = np.sum(x * x, axis=-1)
        return (amp * s * np.exp(-s / width**2)).astype(complex)

    return Symbol(eval=lambda x, xi: cx(x) * np.ones(xi.shape[:-1]),
                  order=SymbolOrder(0.0, 0.0), name=f"harmonic_window(amp={amp})",
                  separable=[(cx, lambda xi: np.ones(xi.shape[:-1], dtype=complex))],
                  x_only=True, is_zero=(amp == 0))


def magnetic_shear(d: int, amp: float = 0.3) -> Symbol:
    """Real first-order term amp (1+|x|^2)^{-1/2} xi_1 (order (0, 1))."""
    def cx(x):
        return (amp / np.sqrt(1.0 + np.sum(x * x, axis=-1))).astype(complex)

    return Symbol(eval=lambda x, xi: cx(x) * xi[..., 0],
                  order=SymbolOrder(0.0, 1.0), name=f"shear(amp={amp})",
                  separable=[(cx, lambda xi: xi[..., 0].astype(complex))],
                  is_zero=(amp == 0))


POTENTIAL_FAMILIES = {
    "none": lambda d, **kw: zero_symbol(),
    "harmonic_window": lambda d, **kw: potential_harmonic_window(d, **kw),
}

MAGNETIC_FAMILIES = {
    "none": lambda d, **kw: zero_symbol(),
    "shear": lambda d, **kw: magnetic_shear(d, **kw),
}


# -- probe grids ---------------------------------------------------------------

def _directions(d: int) -> np.ndarray:
    dirs = []
    for ax in range(d):
        for s in (+1.0, -1.0):
            e = np.zeros(d)
            e[ax] = s
            dirs.append(e)
    return np.asarray(dirs)


def default_probe_grid(d: int, shells=PROBE_SHELLS) -> tuple[np.ndarray, np.ndarray]:
    """All (x, xi) pairs with |x|, |xi| on dyadic shells times axis directions.

    Returns (x, xi) arrays of shape (P, d) forming the full product set.
    """
    dirs = _directions(d)
    pts = np.concatenate([r * dirs for r in shells], axis=0)  # (S*2d, d)
    nx = pts.shape[0]
    x = np.repeat(pts, nx, axis=0)
    xi = np.tile(pts, (nx, 1))
    return x, xi


# -- estimate checks -----------------------------------------------------------

def _multi_indices(d: int, max_total: int):
    if d == 1:
        return [(k,) for k in range(max_total + 1)]
    out = []
    for total in range(max_total + 1):
        for i in range(total + 1):
            out.append((total - i, i))
    return out


def _derivative(sym: Symbol, alpha: tuple, beta: tuple, x: np.ndarray, xi: np.ndarray):
    """d_xi^alpha d_x^beta applied by nested Richardson-extrapolated
    central differences with scale- and order-aware steps."""
    if sym.derivative_oracle is not None:
        return sym.derivative_oracle(alpha, beta, x, xi)
    base = _fd_step_base(sum(alpha) + sum(beta))
    return _fd(sym.eval, alpha, beta, x, xi, base)


def _fd(fn, alpha, beta, x, xi, base):
    for ax, k in enumerate(beta):
        if k > 0:
            beta2 = list(beta)
            beta2[ax] -= 1

            def reduced(x_, xi_, _ax=ax, _b=tuple(beta2)):
                h = base * bracket(np.linalg.norm(x_, axis=-1))
                dx = np.zeros_like(x_)
                dx[..., _ax] = h
                d1 = (_fd(fn, alpha, _b, x_ + dx, xi_, base)
                      - _fd(fn, alpha, _b, x_ - dx, xi_, base)) / (2 * h)
                d2 = (_fd(fn, alpha, _b, x_ + dx / 2, xi_, base)
                      - _fd(fn, alpha, _b, x_ - dx / 2, xi_, base)) / h
                return (4 * d2 - d1) / 3
            return reduced(x, xi)
    for ax, k in enumerate(alpha):
        if k > 0:
            alpha2 = list(alpha)
            alpha2[ax] -= 1

            def reduced(x_, xi_, _ax=ax, _a=tuple(alpha2)):
                h = base * bracket(np.linalg.norm(xi_, axis=-1))
                dxi = np.zeros_like(xi_)
                dxi[..., _ax] = h
                d1 = (_fd(fn, _a, beta, x_, xi_ + dxi, base)
                      - _fd(fn, _a, beta, x_, xi_ - dxi, base)) / (2 * h)
                d2 = (_fd(fn, _a, beta, x_, xi_ + dxi / 2, base)
                      - _fd(fn, _a, beta, x_, xi_ - dxi / 2, base)) / h
                return (4 * d2 - d1) / 3
            return reduced(x, xi)
    return fn(x, xi)


@dataclass
class EstimateEntry:
    alpha: tuple
    beta: tuple
    shell_sups: dict
    constant: float
    passed: bool
    error: str | None = None


@dataclass
class EstimateReport:
    symbol_name: str
    order: SymbolOrder
    entries: list[EstimateEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        shells = sorted({s for e in self.entries for s in e.shell_sups})
        buf.write("alpha,beta," + ",".join(f"shell_{s:g}" for s in shells) + ",constant,verdict\n")
        for e in self.entries:
            cells = [f"{e.shell_sups.get(s, float('nan')):.6e}" for s in shells]
            verdict = "PASS" if e.passed else ("ERROR" if e.error else "FAIL")
            buf.write(f"\"{e.alpha}\",\"{e.beta}\"," + ",".join(cells)
                      + f",{e.constant:.6e},{verdict}\n")
        return buf.getvalue()


def check_symbol_estimates(sym: Symbol, max_alpha: int, max_beta: int,
                           probe_grid=None) -> EstimateReport:
    """Certify the declared order on dyadic probe shells.

    A derivative-estimation failure is recorded per entry, not raised.
    """
    d = 1 if probe_grid is None else probe_grid[0].shape[-1]
    if probe_grid is None:
        probe_grid = default_probe_grid(d)
    x, xi = probe_grid
    shell_of = np.maximum(np.linalg.norm(x, axis=-1), np.linalg.norm(xi, axis=-1))

    report = EstimateReport(sym.name, sym.order)
    for alpha in _multi_indices(d, max_alpha):
        for beta in _multi_indices(d, max_beta):
            try:
                val = np.abs(_derivative(sym, alpha, beta, x, xi))
                weight = (bracket(np.linalg.norm(x, axis=-1)) ** (sum(beta) - sym.order.m)
                          * bracket(np.linalg.norm(xi, axis=-1)) ** (sum(alpha) - sym.order.mu))
                normalized = val * weight
                if not np.all(np.isfinite(normalized)):
                    raise FloatingPointError("non-finite derivative estimate")
                sups = {}
                for s in sorted(set(np.round(shell_of, 9))):
                    mask = np.isclose(shell_of, s)
                    sups[float(s)] = float(normalized[mask].max())
                vals = np.asarray(list(sups.values()))
                largest = vals[-1]
                med = float(np.median(vals))
                passed = bool(largest <= STABLE_FACTOR * max(med, 1e-300))
                report.entries.append(EstimateEntry(alpha, beta, sups, float(vals.max()), passed))
            except FloatingPointError as exc:
                report.entries.append(EstimateEntry(alpha, beta, {}, float("nan"), False, str(exc)))
    return report


class EllipticityError(ValueError):
    def __init__(self, msg, witness_x=None, witness_xi=None):
        super().__init__(msg)
        self.witness_x = witness_x
        self.witness_xi = witness_xi


def check_ellipticity(metric: MetricCoefficients, probe_grid=None) -> float:
    """Best constant C >= 1 with C^{-1}|xi|^2 <= (1/2) sum a_jl xi_j xi_l <= C|xi|^2.

    The positive quadratic form is certified (the operator's principal
    symbol carries an overall minus sign; see module docs).  Raises
    EllipticityError with a witness if the form fails to be positive.
    """
    d = metric.d
    if probe_grid is None:
        xs, _ = default_probe_grid(d)
        x = np.concatenate([np.zeros((1, d)), xs], axis=0)
    else:
        x = probe_grid[0]
    dirs = _directions(d)
    if d == 2:  # off-axis probes catch anisotropic bumps
        diag = np.asarray([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]) / np.sqrt(2)
        dirs = np.concatenate([dirs, diag], axis=0)

    amat = metric.matrix_at(x)  # (P, d, d)
    ratios = 0.5 * np.einsum("pjl,qj,ql->pq", amat, dirs, dirs)  # |xi|=1 so q/|xi|^2
    if np.any(ratios <= 0):
        p, q = np.unravel_index(np.argmin(ratios), ratios.shape)
        raise EllipticityError(
            f"quadratic form is not positive at x={x[p]}, xi={dirs[q]} (value {ratios[p, q]:.3e})",
            witness_x=x[p], witness_xi=dirs[q])
    return float(max(1.0, ratios.max(), 1.0 / ratios.min()))
