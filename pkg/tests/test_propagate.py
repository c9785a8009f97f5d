"""Propagator tests: closed-form Gaussian benchmark, unitarity, semigroup,
scheme convergence orders, CFL gating, growth-bound fits."""

import numpy as np
import pytest

from schrocurve.grid import Field, Grid, gaussian_field, l2_norm, zero_field
from schrocurve.propagate import (
    CFLViolation,
    PropagatorConfig,
    evolve,
    fit_growth,
    growth_bound_check,
    propagator_operator,
)
from schrocurve.quantize import GeneratorBundle, free_bundle
from schrocurve.symbols import (
    build_hamiltonian,
    metric_flat,
    metric_gauss_bump,
    potential_harmonic_window,
    zero_symbol,
)

GRID = Grid(1, 256, 16.0)


def flat_free_cfg(dt=1e-3):
    return PropagatorConfig(GRID, free_bundle(metric_flat(1)), dt)


def free_gaussian_exact(grid, t):
    x = grid.axis()
    s = 1 + 1j * t
    return Field(grid, np.exp(-(x**2) / (2 * s)) / np.sqrt(s))


def test_evolve_zero_time_is_identity():
    u0 = gaussian_field(GRID)
    out = evolve(u0, 0.0, flat_free_cfg())
    assert np.array_equal(out.values, u0.values)


def test_free_gaussian_closed_form():
    cfg = flat_free_cfg(dt=1e-3)
    u0 = gaussian_field(GRID)
    out = evolve(u0, 1.0, cfg)
    exact = free_gaussian_exact(GRID, 1.0)
    err = l2_norm(Field(GRID, out.values - exact.values))
    assert err < 1e-4
    assert abs(l2_norm(out) - l2_norm(u0)) < 1e-8


def test_split_step_unitary_with_real_potential():
    bundle = GeneratorBundle(build_hamiltonian(metric_flat(1)), zero_symbol(),
                             zero_symbol(), potential_harmonic_window(1, amp=1.0))
    cfg = PropagatorConfig(GRID, bundle, dt=1e-3)
    assert cfg.scheme == "split_step"
    u0 = gaussian_field(GRID)
    out = evolve(u0, 1.0, cfg)
    assert abs(l2_norm(out) - l2_norm(u0)) < 1e-8


def test_semigroup_property():
    for metric in (metric_flat(1), metric_gauss_bump(1)):
        cfg = PropagatorConfig(GRID, free_bundle(metric), dt=1e-3,
                               ellipticity=2.0)
        u0 = gaussian_field(GRID)
        two_leg = evolve(evolve(u0, 0.03, cfg), 0.07, cfg)
        one_leg = evolve(u0, 0.1, cfg)
        assert np.abs(two_leg.values - one_leg.values).max() < 1e-12


def test_propagator_operator_contracts():
    cfg = flat_free_cfg()
    u0 = gaussian_field(GRID)
    ident = propagator_operator(0.5, 0.5, cfg)
    assert np.array_equal(ident(u0).values, u0.values)
    # linearity
    v0 = gaussian_field(GRID, width=2.0, center=1.0)
    op = propagator_operator(0.0, 0.05, cfg)
    lhs = op(Field(GRID, 2.0 * u0.values - 1j * v0.values)).values
    rhs = 2.0 * op(u0).values - 1j * op(v0).values
    assert np.abs(lhs - rhs).max() < 1e-12
    with pytest.raises(ValueError):
        propagator_operator(1.0, 0.5, cfg)


def test_strang_second_order_on_split_error():
    bundle = GeneratorBundle(build_hamiltonian(metric_flat(1)), zero_symbol(),
                             zero_symbol(), potential_harmonic_window(1, amp=1.0))
    u0 = gaussian_field(GRID)
    ref = evolve(u0, 0.5, PropagatorConfig(GRID, bundle, dt=1e-4 / 4))
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        out = evolve(u0, 0.5, PropagatorConfig(GRID, bundle, dt=dt))
        errs.append(l2_norm(Field(GRID, out.values - ref.values)))
    orders = np.log2(np.asarray(errs[:-1]) / np.asarray(errs[1:]))
    assert np.all(orders > 1.7) and np.all(orders < 2.3)


def test_rk4_fourth_order():
    bundle = free_bundle(metric_gauss_bump(1))
    u0 = gaussian_field(GRID)
    ref = evolve(u0, 0.1, PropagatorConfig(GRID, bundle, dt=1e-4, ellipticity=2.0))
    errs = []
    for dt in (1e-3, 5e-4):
        out = evolve(u0, 0.1, PropagatorConfig(GRID, bundle, dt=dt, ellipticity=2.0))
        errs.append(l2_norm(Field(GRID, out.values - ref.values)))
    order = float(np.log2(errs[0] / errs[1]))
    assert 3.5 < order < 4.5


def test_cfl_gate():
    bundle = free_bundle(metric_gauss_bump(1))
    with pytest.raises(CFLViolation) as err:
        PropagatorConfig(GRID, bundle, dt=5e-3, ellipticity=2.0)
    assert err.value.suggested_dt < 5e-3
    cfg = PropagatorConfig(GRID, bundle, dt=5e-3, ellipticity=2.0, substeps="auto")
    u0 = gaussian_field(GRID)
    out = evolve(u0, 0.05, cfg)
    assert abs(l2_norm(out) - l2_norm(u0)) < 1e-6


def test_growth_bound_flat_l2_conserved():
    cfg = flat_free_cfg()
    times = np.linspace(0.0, 1.0, 11)
    rep = growth_bound_check([gaussian_field(GRID)], times, 0, 0, cfg)
    assert rep.fitted_C <= 1e-6
    assert rep.passed


def test_growth_bound_zero_datum():
    rep = fit_growth(np.linspace(0, 1, 5), np.zeros(5), 0, 0)
    assert rep.fitted_C == 0.0


def test_growth_bound_moment_growth_stable_under_dt():
    times = np.linspace(0.0, 1.0, 11)
    fits = []
    for dt in (1e-3, 5e-4):
        rep = growth_bound_check([gaussian_field(GRID)], times, 1, 0, flat_free_cfg(dt))
        assert rep.passed and rep.fitted_C > 0
        fits.append(rep.fitted_C)
    assert abs(fits[1] - fits[0]) / fits[0] < 0.05


def test_growth_bound_monotone_in_z():
    times = np.linspace(0.0, 1.0, 6)
    for metric in (metric_flat(1), metric_gauss_bump(1)):
        cfg = PropagatorConfig(GRID, free_bundle(metric), dt=1e-3, ellipticity=2.0)
        c0 = growth_bound_check([gaussian_field(GRID)], times, 0, 0, cfg).fitted_C
        c1 = growth_bound_check([gaussian_field(GRID)], times, 1, 0, cfg).fitted_C
        assert c1 >= c0 - 1e-9


def test_growth_blowup_reported():
    with pytest.raises(OverflowError, match="t="):
        fit_growth(np.linspace(0, 1, 5), np.asarray([1.0, 2.0, np.inf, np.inf, np.inf]), 0, 0)
