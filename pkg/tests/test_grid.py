"""Grid, transform and norm tests.

Derived expectations are computed from independent oracles (closed-form
Fourier pairs checked by quadrature) rather than from the code under test.
"""

import numpy as np
import pytest

from schrocurve.grid import (
    Field,
    Grid,
    algebra_constant_probe,
    boundary_mass,
    forward_transform,
    gaussian_field,
    h_zz_norm,
    inverse_transform,
    l2_norm,
    load_field,
    save_field,
    sobolev_kato_norm,
    zero_field,
)

GRID = Grid(1, 256, 16.0)
GRID2 = Grid(2, 64, 10.0)


def quad_l2_weighted(r, rho, width=1.0):
    """Quadrature oracle for || <x>^r <D>^rho g ||_{L2}, g a centered Gaussian.

    Uses the closed-form pair F[exp(-x^2/(2w^2))] = w sqrt(2 pi) exp(-w^2 xi^2/2)
    and plain trapezoid quadrature on a fine grid; independent of the
    spectral code paths.
    """
    if r != 0 and rho != 0:
        raise ValueError("oracle only handles pure weights")
    if rho == 0:
        x = np.linspace(-40, 40, 400001)
        integrand = (1 + x * x) ** r * np.exp(-(x / width) ** 2)
        return float(np.sqrt(np.trapezoid(integrand, x)))
    xi = np.linspace(-40, 40, 400001)
    spec = width * np.sqrt(2 * np.pi) * np.exp(-(width * xi) ** 2 / 2)
    integrand = (1 + xi * xi) ** rho * spec**2 / (2 * np.pi)
    return float(np.sqrt(np.trapezoid(integrand, xi)))


def test_grid_invariants():
    with pytest.raises(ValueError):
        Grid(3, 256, 16.0)
    with pytest.raises(ValueError):
        Grid(1, 100, 16.0)  # not a power of two
    with pytest.raises(ValueError):
        Grid(1, 4, 16.0)  # too small
    assert GRID.spacing == pytest.approx(0.125)
    assert GRID.freq_axis()[0] == pytest.approx(-np.pi * 128 / 16)


def test_forward_transform_zero():
    fhat = forward_transform(zero_field(GRID))
    assert np.all(fhat.values == 0)


def test_forward_transform_plane_wave_is_discrete_delta():
    k = 5
    xi_k = GRID.freq_axis()[GRID.n // 2 + k]
    f = Field(GRID, np.exp(1j * xi_k * GRID.axis()))
    fhat = forward_transform(f)
    expected = np.zeros(GRID.n, dtype=complex)
    expected[GRID.n // 2 + k] = 2 * GRID.half_width
    assert np.abs(fhat.values - expected).max() < 1e-9


def test_forward_transform_gaussian_matches_closed_form_and_quadrature():
    f = gaussian_field(GRID)
    fhat = forward_transform(f)
    xi = GRID.freq_axis()
    closed = np.sqrt(2 * np.pi) * np.exp(-(xi**2) / 2)
    assert np.abs(fhat.values - closed).max() < 1e-8
    # independent quadrature at a few frequencies
    x = np.linspace(-16, 16, 200001)
    for idx in (GRID.n // 2, GRID.n // 2 + 3, GRID.n // 2 + 11):
        quad = np.trapezoid(np.exp(-1j * x * xi[idx]) * np.exp(-(x**2) / 2), x)
        assert abs(fhat.values[idx] - quad) < 1e-8


def test_round_trip_identity():
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(GRID.shape) + 1j * rng.standard_normal(GRID.shape)
    f = Field(GRID, vals)
    back = inverse_transform(forward_transform(f), GRID)
    assert np.abs(back.values - vals).max() < 1e-12


def test_parseval_grid_level():
    rng = np.random.default_rng(4)
    for grid in (GRID, GRID2):
        vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        f = Field(grid, vals)
        lhs = l2_norm(f) ** 2
        fhat = forward_transform(f)
        rhs = (2 * np.pi) ** (-grid.d) * l2_norm(fhat) ** 2
        assert abs(lhs - rhs) / lhs < 1e-10


def test_sk_norm_zero_field():
    assert sobolev_kato_norm(zero_field(GRID), 1.0, 2.0) == 0.0


def test_sk_norm_gaussian_l2():
    # ||e^{-x^2/2}||_{L2} = pi^{1/4}; quadrature oracle agrees
    f = gaussian_field(GRID)
    val = sobolev_kato_norm(f, 0.0, 0.0)
    assert val == pytest.approx(np.pi**0.25, abs=1e-10)
    assert val == pytest.approx(quad_l2_weighted(0, 0), abs=1e-8)


def test_sk_norm_weight_monotone_in_rho():
    f = gaussian_field(GRID, width=1.3)
    for r in (0.0, 1.0):
        lo = sobolev_kato_norm(f, r, 0.5)
        hi = sobolev_kato_norm(f, r, 1.5)
        assert hi >= lo


def test_sk_norm_weighted_gaussian_against_quadrature():
    f = gaussian_field(GRID)
    assert sobolev_kato_norm(f, 1.0, 0.0) == pytest.approx(quad_l2_weighted(1, 0), abs=1e-8)
    assert sobolev_kato_norm(f, 0.0, 1.0) == pytest.approx(quad_l2_weighted(0, 1), abs=1e-8)
    assert sobolev_kato_norm(f, 0.0, 2.0) == pytest.approx(quad_l2_weighted(0, 2), abs=1e-8)


def test_h_zz_norm_reductions_and_oracle():
    f = gaussian_field(GRID)
    assert h_zz_norm(zero_field(GRID), 2, 1) == 0.0
    # z = 0 coincides with the single Sobolev-Kato norm
    assert h_zz_norm(f, 0, 2) == pytest.approx(sobolev_kato_norm(f, 0.0, 2.0), rel=1e-14)
    # z = 1, zeta = 0: sum of the two weighted norms, against quadrature
    expected = quad_l2_weighted(1, 0) + quad_l2_weighted(0, 1)
    assert h_zz_norm(f, 1, 0) == pytest.approx(expected, abs=1e-7)
    with pytest.raises(ValueError):
        h_zz_norm(f, -1, 0)


def test_h_zz_embedding_chain():
    rng = np.random.default_rng(5)
    for _ in range(5):
        vals = rng.standard_normal(GRID.shape) * np.exp(-GRID.axis() ** 2 / 4)
        f = Field(GRID, vals + 0j)
        z, zeta = 1, 1
        summands = [sobolev_kato_norm(f, z - j, j + zeta) for j in range(z + 1)]
        hzz = h_zz_norm(f, z, zeta)
        assert sobolev_kato_norm(f, z, zeta) <= hzz + 1e-12
        assert hzz <= (z + 1) * max(summands) + 1e-12


def test_norm_homogeneity_and_triangle():
    rng = np.random.default_rng(6)
    env = np.exp(-GRID.axis() ** 2 / 8)
    for _ in range(5):
        u = Field(GRID, (rng.standard_normal(GRID.n) + 1j * rng.standard_normal(GRID.n)) * env)
        v = Field(GRID, (rng.standard_normal(GRID.n) + 1j * rng.standard_normal(GRID.n)) * env)
        c = complex(rng.standard_normal(), rng.standard_normal())
        assert h_zz_norm(Field(GRID, c * u.values), 1, 1) == pytest.approx(
            abs(c) * h_zz_norm(u, 1, 1), rel=1e-10)
        assert h_zz_norm(Field(GRID, u.values + v.values), 1, 1) <= (
            h_zz_norm(u, 1, 1) + h_zz_norm(v, 1, 1) + 1e-10)


def test_algebra_probe_stable_across_resolution():
    vals = []
    for n in (256, 512):
        grid = Grid(1, n, 16.0)
        u = gaussian_field(grid)
        vals.append(algebra_constant_probe(0, 1, [(u, u)]))
    assert vals[0] > 0
    assert abs(vals[1] - vals[0]) / vals[0] < 0.05


def test_algebra_probe_skips_zero_pairs():
    assert algebra_constant_probe(0, 1, [(zero_field(GRID), zero_field(GRID))]) == 0.0


def test_boundary_mass():
    assert boundary_mass(zero_field(GRID)) == 0.0
    assert boundary_mass(gaussian_field(GRID)) < 1e-12
    wide = gaussian_field(GRID, width=12.0)
    assert boundary_mass(wide) > 1e-8


def test_field_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    f = Field(GRID2, rng.standard_normal(GRID2.shape) + 1j * rng.standard_normal(GRID2.shape))
    path = tmp_path / "field.bin"
    side = save_field(f, path)
    assert side["d"] == 2 and side["n"] == 64
    g2 = load_field(path)
    assert g2.grid == f.grid
    assert np.array_equal(g2.values, f.values)
    # corruption is caught by the checksum
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="checksum"):
        load_field(path)
