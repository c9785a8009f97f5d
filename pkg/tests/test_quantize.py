"""Operator application tests: multiplier/multiplication reductions, the
direct Kohn-Nirenberg path, generator assembly, continuity probes."""

import numpy as np
import pytest

from schrocurve.grid import Field, Grid, gaussian_field, sobolev_kato_norm, zero_field
from schrocurve.quantize import (
    BoundaryMassWarning,
    GeneratorBundle,
    apply_generator,
    apply_op,
    continuity_probe,
    free_bundle,
    lambda_weight,
)
from schrocurve.symbols import (
    Symbol,
    SymbolOrder,
    build_hamiltonian,
    constant_symbol,
    magnetic_shear,
    metric_flat,
    metric_gauss_bump,
    potential_harmonic_window,
    zero_symbol,
)

GRID = Grid(1, 256, 16.0)


def plane_wave(grid, k):
    xi_k = grid.freq_axis()[grid.n // 2 + k]
    return Field(grid, np.exp(1j * xi_k * grid.axis())), xi_k


def test_identity_symbol_is_identity():
    f = gaussian_field(GRID)
    out = apply_op(constant_symbol(1.0), f)
    assert np.abs(out.values - f.values).max() < 1e-12


@pytest.mark.filterwarnings("ignore::schrocurve.quantize.BoundaryMassWarning")
def test_multiplier_on_plane_wave():
    f, xi_k = plane_wave(GRID, 7)
    out = apply_op(lambda_weight(0.0, 2.0), f)
    expected = (1 + xi_k**2) * f.values
    assert np.abs(out.values - expected).max() / np.abs(expected).max() < 1e-12


def test_x_symbol_is_pointwise_multiplication():
    f = gaussian_field(GRID)
    out = apply_op(lambda_weight(1.0, 0.0), f)
    expected = np.sqrt(1 + GRID.axis() ** 2) * f.values
    assert np.abs(out.values - expected).max() < 1e-12


def test_apply_op_linearity():
    rng = np.random.default_rng(8)
    env = np.exp(-GRID.axis() ** 2 / 8)
    f = Field(GRID, (rng.standard_normal(GRID.n) + 1j * rng.standard_normal(GRID.n)) * env)
    g = Field(GRID, (rng.standard_normal(GRID.n) + 1j * rng.standard_normal(GRID.n)) * env)
    a, b = 1.3 - 0.4j, -0.7 + 2.1j
    sym = build_hamiltonian(metric_gauss_bump(1))
    lhs = apply_op(sym, Field(GRID, a * f.values + b * g.values)).values
    rhs = a * apply_op(sym, f).values + b * apply_op(sym, g).values
    assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-12


def test_separable_matches_direct_kn():
    sym = build_hamiltonian(metric_gauss_bump(1, eps=0.8))
    direct = Symbol(eval=sym.eval, order=sym.order, name="direct-only")
    f = gaussian_field(GRID, width=1.5)
    fast = apply_op(sym, f).values
    slow = apply_op(direct, f).values
    assert np.abs(fast - slow).max() / np.abs(slow).max() < 1e-10


def test_direct_kn_rejected_in_2d():
    grid2 = Grid(2, 16, 8.0)
    sym = Symbol(eval=lambda x, xi: np.ones(np.broadcast(x[..., 0], xi[..., 0]).shape, dtype=complex),
                 order=SymbolOrder(0, 0), name="opaque")
    with pytest.raises(NotImplementedError):
        apply_op(sym, zero_field(grid2))


def test_boundary_warning_attached():
    wide = gaussian_field(GRID, width=12.0)
    with pytest.warns(BoundaryMassWarning):
        out = apply_op(constant_symbol(1.0), wide)
    assert "boundary_warning" in out.meta


@pytest.mark.filterwarnings("ignore::schrocurve.quantize.BoundaryMassWarning")
def test_generator_flat_free_on_plane_wave():
    bundle = free_bundle(metric_flat(1))
    bundle.validate(1)
    f, xi_k = plane_wave(GRID, 9)
    out = apply_generator(bundle, f)
    expected = -(xi_k**2) / 2 * f.values
    assert np.abs(out.values - expected).max() / np.abs(expected).max() < 1e-12


def test_generator_zero_bundle():
    bundle = GeneratorBundle(zero_symbol(), zero_symbol(), zero_symbol(), zero_symbol())
    f = gaussian_field(GRID)
    assert np.all(apply_generator(bundle, f).values == 0)


def test_generator_potential_only_is_multiplication():
    V = potential_harmonic_window(1, amp=0.7, width=2.0)
    bundle = GeneratorBundle(zero_symbol(), zero_symbol(), zero_symbol(), V)
    f = gaussian_field(GRID)
    out = apply_generator(bundle, f)
    x = GRID.axis()
    expected = 0.7 * x**2 * np.exp(-(x**2) / 4.0) * f.values
    assert np.abs(out.values - expected).max() < 1e-12


def test_bundle_validation():
    bad = GeneratorBundle(constant_symbol(1.0), zero_symbol(), zero_symbol(), zero_symbol())
    with pytest.raises(ValueError, match="order"):
        bad.validate(1)
    complex_m1 = Symbol(eval=lambda x, xi: 1j * xi[..., 0], order=SymbolOrder(0, 1), name="imag")
    with pytest.raises(ValueError, match="real"):
        GeneratorBundle(build_hamiltonian(metric_flat(1)), zero_symbol(),
                        complex_m1, zero_symbol()).validate(1)
    ok = GeneratorBundle(build_hamiltonian(metric_flat(1)), zero_symbol(),
                         magnetic_shear(1, amp=0.3), zero_symbol())
    ok.validate(1)
    assert not ok.is_split_separable()  # shear mixes x and xi
    assert free_bundle(metric_flat(1)).is_split_separable()


def test_lambda_weight_single_source_of_truth():
    # Op(lambda_{r,rho}) equals the <x>^r after <D>^rho composition that
    # the weighted norm uses
    f = gaussian_field(GRID, width=0.8)
    r, rho = 1.0, 2.0
    out = apply_op(lambda_weight(r, rho), f)
    assert sobolev_kato_norm(f, r, rho) == pytest.approx(
        float(np.sqrt(GRID.cell_volume * np.sum(np.abs(out.values) ** 2))), rel=1e-12)


def test_continuity_probe_identity():
    samples = [gaussian_field(GRID, width=w) for w in (0.7, 1.0, 2.0)]
    ratio = continuity_probe(constant_symbol(1.0), SymbolOrder(0, 0), samples, 0.0, 0.0)
    assert ratio == pytest.approx(1.0, abs=1e-12)


def test_continuity_probe_bracket_multiplier_isometry():
    samples = [gaussian_field(GRID, width=w) for w in (0.7, 1.0, 2.0)]
    sym = lambda_weight(0.0, 2.0)
    ratio = continuity_probe(sym, sym.order, samples, 0.0, 2.0)
    assert ratio <= 1 + 1e-10
    assert ratio == pytest.approx(1.0, abs=1e-10)


def test_continuity_probe_flat_hamiltonian():
    samples = [gaussian_field(GRID, width=w) for w in (0.7, 1.0, 2.0)]
    sym = build_hamiltonian(metric_flat(1))
    ratio = continuity_probe(sym, sym.order, samples, 0.0, 2.0)
    assert ratio <= 0.5 + 1e-10


def test_continuity_probe_stable_across_resolution():
    sym = build_hamiltonian(metric_gauss_bump(1))
    vals = []
    for n in (256, 512):
        grid = Grid(1, n, 16.0)
        samples = [gaussian_field(grid, width=w) for w in (0.7, 1.5)]
        vals.append(continuity_probe(sym, sym.order, samples, 0.0, 2.0))
    assert abs(vals[1] - vals[0]) / vals[0] < 0.05
