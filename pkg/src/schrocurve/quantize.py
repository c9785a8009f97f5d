"""Kohn-Nirenberg quantization: applying Op(a) to fields.

    (Op(a) f)(x) = (2 pi)^{-d} sum_xi exp(i x.xi) a(x, xi) fhat(xi) dxi

Three application paths, in order of preference:
  * xi-only symbols: exact Fourier multiplier;
  * separable symbols a = sum_p c_p(x) m_p(xi): one multiplier pass plus a
    pointwise multiply per term (every shipped family has <= d^2 terms);
  * anything else: direct summation, d = 1 only (O(n^2) matrix apply).

x-only symbols reduce to pointwise multiplication exactly; the weight
symbol <x>^r <xi>^rho quantizes as <x>^r applied after <D>^rho, which is
the same composition the weighted norms use.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import grid as g
from ._kernels import multiplier_apply, separable_apply
from .conventions import bracket_radial
from .grid import BOUNDARY_FLAG_THRESHOLD, Field, Grid, boundary_mass
from .symbols import Symbol, SymbolOrder, build_hamiltonian, build_lower_metric_term


class BoundaryMassWarning(UserWarning):
    pass


def _stack_points(*axes_arrays) -> np.ndarray:
    return np.stack(axes_arrays, axis=-1)


def separable_factor_arrays(sym: Symbol, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a separable symbol's factors on the grid.

    Returns (cxs, mxis): (P, *shape) spatial factors in natural order and
    frequency factors in fft bin order.
    """
    if sym.separable is None:
        raise ValueError(f"symbol {sym.name} has no separable representation")
    xpts = _stack_points(*grid.points())
    xipts = _stack_points(*grid.freq_points_fft())
    cxs = np.stack([np.broadcast_to(np.asarray(cx(xpts), dtype=complex), grid.shape)
                    for cx, _ in sym.separable])
    mxis = np.stack([np.broadcast_to(np.asarray(mxi(xipts), dtype=complex), grid.shape)
                     for _, mxi in sym.separable])
    return cxs, mxis


def apply_op(sym: Symbol, f: Field) -> Field:
    """Apply Op(sym) to a field.

    A boundary-mass violation attaches a warning to the result instead of
    failing (truncation error may no longer be negligible).
    """
    bm = boundary_mass(f)
    out_meta = dict(f.meta)
    if bm > BOUNDARY_FLAG_THRESHOLD:
        msg = f"boundary mass {bm:.2e} exceeds {BOUNDARY_FLAG_THRESHOLD:.0e}"
        warnings.warn(msg, BoundaryMassWarning, stacklevel=2)
        out_meta["boundary_warning"] = msg

    if sym.is_zero:
        return Field(f.grid, np.zeros_like(f.values), out_meta)
    if sym.xi_only:  # exact Fourier multiplier
        xipts = _stack_points(*f.grid.freq_points_fft())
        mult = np.asarray(sym.eval(np.zeros_like(xipts), xipts), dtype=complex)
        return Field(f.grid, multiplier_apply(f.values, mult), out_meta)
    if sym.x_only:  # exact pointwise multiplication
        xpts = _stack_points(*f.grid.points())
        factor = np.asarray(sym.eval(xpts, np.zeros_like(xpts)), dtype=complex)
        return Field(f.grid, factor * f.values, out_meta)
    if sym.separable is not None:
        cxs, mxis = separable_factor_arrays(sym, f.grid)
        return Field(f.grid, separable_apply(f.values, cxs, mxis), out_meta)
    if f.grid.d != 1:
        raise NotImplementedError(
            f"general (non-separable) symbols are only quantized directly in d=1; "
            f"{sym.name} on d={f.grid.d}")
    return Field(f.grid, _apply_direct_1d(sym, f), out_meta)


def _apply_direct_1d(sym: Symbol, f: Field) -> np.ndarray:
    grid = f.grid
    fhat = g.forward_values(f.values, grid)  # ascending xi order
    x = grid.axis()
    xi = grid.freq_axis()
    a = sym.eval(x[:, None, None], xi[None, :, None])  # (n, n)
    phase = np.exp(1j * np.outer(x, xi))
    dxi = grid.freq_spacing
    return (dxi / (2 * np.pi)) * np.sum(phase * a * fhat[None, :], axis=1)


def lambda_weight(r: float, rho: float) -> Symbol:
    """The weight symbol <x>^r <xi>^rho (order (r, rho))."""
    def cx(x):
        return bracket_radial(*[x[..., i] for i in range(x.shape[-1])]) ** r + 0j

    def mxi(xi):
        return bracket_radial(*[xi[..., i] for i in range(xi.shape[-1])]) ** rho + 0j

    return Symbol(eval=lambda x, xi: cx(x) * mxi(xi), order=SymbolOrder(r, rho),
                  name=f"lambda({r},{rho})", separable=[(cx, mxi)],
                  x_only=(rho == 0), xi_only=(r == 0))


@dataclass
class GeneratorBundle:
    """The four operator pieces: hamiltonian a, lower-order metric term a1,
    real first-order term m1, potential m0."""

    a: Symbol
    a1: Symbol
    m1: Symbol
    m0: Symbol

    def parts(self) -> list[Symbol]:
        return [self.a, self.a1, self.m1, self.m0]

    def active_parts(self) -> list[Symbol]:
        return [s for s in self.parts() if not s.is_zero]

    def validate(self, d: int, rng_seed: int = 0) -> None:
        """Declared orders must match the operator hypotheses; m1 must be
        real on probes.  Zero symbols satisfy any slot vacuously."""
        expected = [(0.0, 2.0), (-1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]
        for sym, (m, mu) in zip(self.parts(), expected):
            if sym.is_zero:
                continue
            if (sym.order.m, sym.order.mu) != (m, mu):
                raise ValueError(
                    f"{sym.name}: declared order {(sym.order.m, sym.order.mu)} != required {(m, mu)}")
        if not self.m1.is_zero:
            rng = np.random.default_rng(rng_seed)
            x = rng.normal(scale=3.0, size=(64, d))
            xi = rng.normal(scale=3.0, size=(64, d))
            vals = self.m1.eval(x, xi)
            if np.abs(np.imag(vals)).max() > 1e-12:
                raise ValueError("m1 must be real-valued")

    def is_split_separable(self) -> bool:
        """True when the bundle splits into xi-only + x-only parts
        (the Strang split-step requirement)."""
        return all(s.is_zero or s.x_only or s.xi_only for s in self.parts())

    def combined_factors(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """All active parts' separable factors concatenated."""
        cxs, mxis = [], []
        for s in self.active_parts():
            c, m = separable_factor_arrays(s, grid)
            cxs.append(c)
            mxis.append(m)
        if not cxs:
            z = np.zeros((1,) + grid.shape, dtype=complex)
            return z, z.copy()
        return np.concatenate(cxs), np.concatenate(mxis)

    def xi_multiplier(self, grid: Grid) -> np.ndarray:
        """Total symbol of the xi-only parts, fft order."""
        xipts = _stack_points(*grid.freq_points_fft())
        xzero = np.zeros_like(xipts)
        total = np.zeros(grid.shape, dtype=complex)
        for s in self.active_parts():
            if s.xi_only:
                total += s.eval(xzero, xipts)
        return total

    def x_potential(self, grid: Grid) -> np.ndarray:
        """Total symbol of the x-only (and not xi-only) parts, natural order."""
        xpts = _stack_points(*grid.points())
        xizero = np.zeros_like(xpts)
        total = np.zeros(grid.shape, dtype=complex)
        for s in self.active_parts():
            if s.x_only and not s.xi_only:
                total += s.eval(xpts, xizero)
        return total


def free_bundle(metric) -> GeneratorBundle:
    """Bundle with only the metric pieces (no magnetic or potential term)."""
    from .symbols import zero_symbol
    return GeneratorBundle(build_hamiltonian(metric), build_lower_metric_term(metric),
                           zero_symbol(), zero_symbol())


def apply_generator(bundle: GeneratorBundle, f: Field) -> Field:
    """Op(a)f + Op(a1)f + Op(m1)f + Op(m0)f."""
    out = np.zeros_like(f.values)
    meta = dict(f.meta)
    for s in bundle.active_parts():
        piece = apply_op(s, f)
        out += piece.values
        meta.update(piece.meta)
    return Field(f.grid, out, meta)


def continuity_probe(sym: Symbol, order: SymbolOrder, samples: list[Field],
                     r: float, rho: float) -> float:
    """max ||Op(a)f||_{H^{r-m, rho-mu}} / ||f||_{H^{r,rho}} over the samples."""
    worst = 0.0
    for f in samples:
        denom = g.sobolev_kato_norm(f, r, rho)
        if denom == 0.0:
            continue
        num = g.sobolev_kato_norm(apply_op(sym, f), r - order.m, rho - order.mu)
        worst = max(worst, num / denom)
    return worst
