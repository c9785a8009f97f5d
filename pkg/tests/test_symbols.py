"""Symbol construction, estimate certification and ellipticity tests."""

import numpy as np
import pytest

from schrocurve.symbols import (
    EllipticityError,
    MetricCoefficients,
    Symbol,
    SymbolOrder,
    build_hamiltonian,
    build_lower_metric_term,
    check_ellipticity,
    check_symbol_estimates,
    constant_symbol,
    default_probe_grid,
    metric_flat,
    metric_gauss_bump,
    metric_rational_decay,
    symbol_product,
)


def pt(*coords):
    return np.asarray([coords], dtype=float)


def test_hamiltonian_flat_values():
    a = build_hamiltonian(metric_flat(2))
    # -(1/2)|xi|^2 at xi = (2, 0)
    assert a(pt(0.3, -1.0), pt(2.0, 0.0))[0] == pytest.approx(-2.0)
    assert a(pt(5.0, 5.0), pt(0.0, 0.0))[0] == 0.0
    assert a.order == SymbolOrder(0.0, 2.0)


def test_hamiltonian_bump_value():
    # a_11(x) = 1 + e^{-x^2}: at x=0, xi=1 the form is -(1/2)(2)(1) = -1
    a = build_hamiltonian(metric_gauss_bump(1, eps=1.0))
    assert a(pt(0.0), pt(1.0))[0] == pytest.approx(-1.0)


def test_lower_metric_term_flat_is_zero():
    a1 = build_lower_metric_term(metric_flat(2))
    assert a1.is_zero
    x, xi = default_probe_grid(2)
    assert np.all(a1(x, xi) == 0)


def test_lower_metric_term_hand_derivative():
    # a_11 = 1 + e^{-x^2}: a1(1, 1) = (i/2)(-2 e^{-1})
    a1 = build_lower_metric_term(metric_gauss_bump(1, eps=1.0))
    assert a1(pt(1.0), pt(1.0))[0] == pytest.approx(0.5j * (-2 * np.exp(-1)), abs=1e-12)
    # linear in xi: vanishes at xi = 0
    assert a1(pt(1.0), pt(0.0))[0] == 0


def test_lower_metric_term_fd_matches_analytic():
    analytic = metric_gauss_bump(1, eps=0.7)
    fd = MetricCoefficients(1, analytic._coeff, grad=None, name="fd-copy")
    a1a = build_lower_metric_term(analytic)
    a1f = build_lower_metric_term(fd)
    x, xi = default_probe_grid(1)
    assert np.abs(a1a(x, xi) - a1f(x, xi)).max() < 1e-9


def test_metric_symmetry_enforced():
    def coeff(j, l):
        def fn(x):
            return np.full(x.shape[:-1], 1.0 + (0.2 if (j, l) == (0, 1) else 0.0))
        return fn
    with pytest.raises(ValueError, match="symmetric"):
        MetricCoefficients(2, coeff)


def test_estimates_constant_symbol_passes():
    rep = check_symbol_estimates(constant_symbol(1.0), 2, 2)
    assert rep.passed
    assert all(e.constant <= 1.0 + 1e-9 for e in rep.entries)


def test_estimates_flat_hamiltonian():
    rep = check_symbol_estimates(build_hamiltonian(metric_flat(1)), 2, 2)
    assert rep.passed
    base = next(e for e in rep.entries if e.alpha == (0,) and e.beta == (0,))
    # |xi|^2/2 / <xi>^2 peaks at the outermost shell: (16^2/2)/(1+16^2)
    assert base.constant == pytest.approx(128 / 257, abs=1e-9)
    assert base.constant <= 0.5


def test_estimates_exponential_fails_declared_flat_order():
    bad = Symbol(eval=lambda x, xi: np.exp(np.linalg.norm(x, axis=-1)) + 0j,
                 order=SymbolOrder(0.0, 0.0), name="exp|x|")
    rep = check_symbol_estimates(bad, 0, 0)
    assert not rep.passed


def test_estimates_metric_families_at_declared_orders():
    for metric in (metric_gauss_bump(1), metric_rational_decay(1)):
        assert check_symbol_estimates(build_hamiltonian(metric), 2, 2).passed
        assert check_symbol_estimates(build_lower_metric_term(metric), 2, 2).passed


def test_estimates_report_csv():
    rep = check_symbol_estimates(build_hamiltonian(metric_flat(1)), 1, 1)
    csv = rep.to_csv()
    assert csv.splitlines()[0].startswith("alpha,beta,shell_1")
    assert "PASS" in csv


def test_product_order_additivity():
    p = build_hamiltonian(metric_gauss_bump(1))  # (0, 2)
    q = build_lower_metric_term(metric_rational_decay(1))  # (-1, 1)
    prod = symbol_product(p, q)
    assert prod.order == SymbolOrder(-1.0, 3.0)
    assert check_symbol_estimates(prod, 2, 2).passed


def test_ellipticity_flat():
    # form |xi|^2/2: the lower inequality binds, C = 2
    assert check_ellipticity(metric_flat(1)) == pytest.approx(2.0)
    assert check_ellipticity(metric_flat(2)) == pytest.approx(2.0)


def test_ellipticity_scaled_constant():
    # a_11 = 2: form is exactly |xi|^2, both inequalities hold at C = 1
    def coeff(j, l):
        def fn(x):
            return np.full(x.shape[:-1], 2.0)
        return fn
    m = MetricCoefficients(1, coeff, is_constant=True)
    assert check_ellipticity(m) == pytest.approx(1.0)


def test_ellipticity_negative_form_has_witness():
    def coeff(j, l):
        def fn(x):
            return np.full(x.shape[:-1], -1.0)
        return fn
    with pytest.raises(EllipticityError) as err:
        check_ellipticity(MetricCoefficients(1, coeff, is_constant=True))
    assert err.value.witness_x is not None


def test_ellipticity_coordinate_relabel_invariant():
    c1 = check_ellipticity(metric_gauss_bump(2, eps=0.5, direction=(1, 0)))
    c2 = check_ellipticity(metric_gauss_bump(2, eps=0.5, direction=(0, 1)))
    assert c1 == pytest.approx(c2, rel=1e-12)


def test_ellipticity_bump_value():
    # ratios (1 + 0.5 e^{-x^2})/2 range over [1/2, 3/4]; lower bound binds
    assert check_ellipticity(metric_gauss_bump(1, eps=0.5)) == pytest.approx(2.0)
