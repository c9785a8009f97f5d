"""Spatially homogeneous Gaussian noise: spectral measure, correlation
measure, Cameron-Martin basis, and Monte Carlo covariance validation.

The spectral measure is discretized as symmetric atoms on the dual-grid
nodes (densities are binned with weight density * dxi^d), which makes the
symmetric L^2 space finite-dimensional and every basis sum exact.  The
Nyquist row k = -n/2 carries no weight: it has no mirror node, and
excluding it keeps the xi -> -xi symmetry exact.

Two noise representations coexist, on purpose:

  * the Cameron-Martin basis uses one even mode per symmetric orbit
    {xi, -xi} (indicator seeds, so Gram-Schmidt is exact normalization);
    fields e_j = transform of f_j dM are sqrt(2w) cos(xi.x) /
    sqrt(w0) const.  The stochastic integral, Hilbert-Schmidt sums and
    the solvers run over this basis.
  * field realizations are synthesized with the cosine+sine quadrature
    pair per orbit, the standard stationary synthesis; this is what makes
    point-evaluation covariance depend on x - y only and reproduces the
    covariance functional for real test fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, forward_values, inverse_values

PATH_STREAM_TAG = 0x5749454E  # distinct Philox key spaces per purpose
FIELD_STREAM_TAG = 0x464C4400


def path_stream(seed: int, sample_index: int) -> np.random.Generator:
    """Counter-based stream for Wiener increments of one sample path."""
    return np.random.Generator(np.random.Philox(key=[seed ^ PATH_STREAM_TAG, sample_index]))


def field_stream(seed: int, sample_index: int) -> np.random.Generator:
    """Counter-based stream for stationary field synthesis draws."""
    return np.random.Generator(np.random.Philox(key=[seed ^ FIELD_STREAM_TAG, sample_index]))


class SpectralMeasure:
    """Nonnegative symmetric measure on the dual-grid nodes.

    weights_fft: nonnegative array in fft bin order (grid.shape); the
    measure is sum_k weights[k] delta_{xi_k}.
    """

    def __init__(self, grid: Grid, weights_fft: np.ndarray, kind: str = "atoms"):
        w = np.asarray(weights_fft, dtype=float)
        if w.shape != grid.shape:
            raise ValueError("weights shape does not match grid")
        if np.any(w < 0):
            raise ValueError("spectral weights must be nonnegative")
        if not np.all(np.isfinite(w)):
            raise ValueError("spectral weights must be finite (finite total mass)")
        self.grid = grid
        self.kind = kind
        w = w.copy()
        for ax in range(grid.d):  # Nyquist rows have no mirror node
            sl = [slice(None)] * grid.d
            sl[ax] = grid.n // 2
            w[tuple(sl)] = 0.0
        self.weights_fft = w
        refl = self._reflect(w)
        if not np.allclose(w, refl, rtol=0, atol=1e-12 * max(w.max(), 1.0)):
            raise ValueError("spectral measure must be symmetric under xi -> -xi")

    @staticmethod
    def _reflect(w: np.ndarray) -> np.ndarray:
        out = w[::-1] if w.ndim == 1 else w[::-1, ::-1]
        return np.roll(out, shift=(1,) * w.ndim, axis=tuple(range(w.ndim)))

    def total_mass(self) -> float:
        return float(self.weights_fft.sum())

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """(coords (A, d), weights (A,)) of the strictly positive atoms."""
        idx = np.argwhere(self.weights_fft > 0)
        axes = self.grid.freq_axis_fft()
        coords = axes[idx]
        return coords.reshape(len(idx), self.grid.d), self.weights_fft[tuple(idx.T)]

    def orbits(self) -> list["Orbit"]:
        """Symmetric orbits {xi, -xi}, heaviest first (ties: closest to 0,
        then lexicographic); the deterministic basis/truncation order."""
        n = self.grid.n
        d = self.grid.d
        w = self.weights_fft
        seen = np.zeros(w.shape, dtype=bool)
        orbits = []
        for idx in np.argwhere(w > 0):
            tidx = tuple(idx)
            if seen[tidx]:
                continue
            ridx = tuple((-idx) % n)
            seen[tidx] = True
            seen[ridx] = True
            axes = self.grid.freq_axis_fft()
            xi = np.array([axes[i] for i in tidx])
            weight = float(w[tidx]) if ridx == tidx else float(w[tidx] + w[ridx])
            orbits.append(Orbit(xi=xi, weight=weight, indices=(tidx,) if ridx == tidx else (tidx, ridx)))
        orbits.sort(key=lambda o: (-o.weight, float(np.linalg.norm(o.xi)), tuple(o.xi)))
        return orbits

    def describe(self) -> dict:
        coords, wts = self.atoms()
        return {"kind": self.kind, "n_atoms": int(len(wts)), "mass": self.total_mass()}


@dataclass(frozen=True)
class Orbit:
    xi: np.ndarray
    weight: float
    indices: tuple

    @property
    def is_zero(self) -> bool:
        return len(self.indices) == 1


def spectral_atoms(grid: Grid, atoms: list[tuple], snap_tol: float = 1e-9) -> SpectralMeasure:
    """Measure from explicit (xi, w) atoms, snapped to dual-grid nodes.

    xi is a scalar in d=1 or a length-d sequence; atoms must come in
    symmetric pairs (or sit at 0).
    """
    w = np.zeros(grid.shape)
    axes = grid.freq_axis_fft()
    dxi = grid.freq_spacing
    for xi, weight in atoms:
        if weight < 0:
            raise ValueError("atom weights must be nonnegative")
        coords = np.atleast_1d(np.asarray(xi, dtype=float))
        if coords.shape != (grid.d,):
            raise ValueError(f"atom coordinate {xi!r} has wrong dimension")
        idx = []
        for c in coords:
            k = int(np.round(c / dxi))
            if abs(k * dxi - c) > max(snap_tol, 1e-9 * max(abs(c), 1.0)):
                raise ValueError(f"atom at {c:g} is not within snap tolerance of a grid node")
            if not (-grid.n // 2 < k < grid.n // 2):
                raise ValueError(f"atom frequency {c:g} outside the grid (|k| must be < n/2)")
            idx.append(k % grid.n)
        w[tuple(idx)] += weight
    return SpectralMeasure(grid, w, kind="atoms")


def spectral_gaussian_density(grid: Grid, width: float = 1.0, cutoff: float = 8.0,
                              mass: float | None = None) -> SpectralMeasure:
    """Density exp(-|xi/width|^2) 1_{|xi| <= cutoff}, binned to atoms;
    optionally rescaled to a target total mass."""
    pts = np.stack(grid.freq_points_fft(), axis=-1)
    r2 = np.sum(pts * pts, axis=-1)
    dens = np.exp(-r2 / width**2) * (np.sqrt(r2) <= cutoff)
    w = dens * grid.freq_spacing**grid.d
    m = SpectralMeasure(grid, w, kind="gaussian_density")
    if mass is not None:
        m = SpectralMeasure(grid, m.weights_fft * (mass / m.total_mass()), kind="gaussian_density")
    return m


def spectral_uniform_density(grid: Grid, cutoff: float = 2.0,
                             mass: float | None = None) -> SpectralMeasure:
    """Flat density on |xi| <= cutoff, binned to atoms."""
    pts = np.stack(grid.freq_points_fft(), axis=-1)
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    w = (r <= cutoff).astype(float) * grid.freq_spacing**grid.d
    m = SpectralMeasure(grid, w, kind="uniform_density")
    if mass is not None:
        m = SpectralMeasure(grid, m.weights_fft * (mass / m.total_mass()), kind="uniform_density")
    return m


def total_mass(measure: SpectralMeasure) -> float:
    return measure.total_mass()


@dataclass
class CorrelationMeasure:
    """Grid samples of the correlation function Gamma = (2 pi)^{-d} (dM)^."""

    grid: Grid
    values: np.ndarray  # real, natural order


def correlation_from_spectral(measure: SpectralMeasure, grid: Grid | None = None) -> CorrelationMeasure:
    grid = grid or measure.grid
    density_ascending = np.fft.fftshift(measure.weights_fft) / grid.freq_spacing**grid.d
    vals = inverse_values(density_ascending, grid)
    imag_max = np.abs(vals.imag).max()
    if imag_max > 1e-10 * max(np.abs(vals.real).max(), 1.0):
        raise AssertionError(f"correlation came out non-real ({imag_max:.2e}); measure asymmetric?")
    return CorrelationMeasure(grid, vals.real.copy())


def spectral_from_correlation(corr: CorrelationMeasure) -> np.ndarray:
    """Forward transform of Gamma: recovers the density on the dual grid
    (ascending order); used for round-trip checks."""
    return forward_values(corr.values.astype(complex), corr.grid)


@dataclass
class CMMode:
    orbit: Orbit
    f_value: float  # the constant value of f_j on its orbit
    e_field: Field


class CameronMartinBasis:
    """Orthonormal even modes f_j (indicator seeds) with their transformed
    fields e_j = (f_j dM)^."""

    def __init__(self, measure: SpectralMeasure, count: int):
        orbits = measure.orbits()
        if count > len(orbits):
            raise ValueError(
                f"requested {count} modes but the measure has only {len(orbits)} symmetric orbits")
        self.measure = measure
        self.modes: list[CMMode] = []
        grid = measure.grid
        pts = grid.points()
        for orbit in orbits[:count]:
            fval = 1.0 / np.sqrt(orbit.weight)
            phase = sum(p * c for p, c in zip(pts, orbit.xi))
            if orbit.is_zero:
                evals = np.full(grid.shape, orbit.weight * fval, dtype=complex)
            else:
                evals = (orbit.weight * fval) * np.cos(phase).astype(complex)
            self.modes.append(CMMode(orbit, fval, Field(grid, evals)))

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def count(self) -> int:
        return len(self.modes)

    def e_fields_matrix(self) -> np.ndarray:
        """(J, *shape) stack of the mode fields."""
        return np.stack([m.e_field.values for m in self.modes])

    def gram_matrix(self) -> np.ndarray:
        """<f_i, f_j>_{L2_dM}, identity by construction (checked in tests)."""
        J = len(self.modes)
        g = np.zeros((J, J))
        for i, mi in enumerate(self.modes):
            for j, mj in enumerate(self.modes):
                if mi.orbit.indices == mj.orbit.indices:
                    g[i, j] = mi.orbit.weight * mi.f_value * mj.f_value
        return g

    def coefficients(self, g_of_xi) -> np.ndarray:
        """<g, f_j>_{L2_dM} for an even function g given as a callable of xi."""
        out = np.zeros(len(self.modes))
        for j, m in enumerate(self.modes):
            acc = 0.0
            w_each = m.orbit.weight / len(m.orbit.indices)
            for idx in m.orbit.indices:
                xi = np.array([self.measure.grid.freq_axis_fft()[i] for i in idx])
                acc += w_each * float(g_of_xi(xi)) * m.f_value
            out[j] = acc
        return out


def build_cm_basis(measure: SpectralMeasure, count: int | None = None) -> CameronMartinBasis:
    if count is None:
        count = min(64, len(measure.orbits()))
    return CameronMartinBasis(measure, count)


# -- stationary field synthesis -------------------------------------------------

class NoiseSynthesizer:
    """Samples increments dXi of the homogeneous field over steps of size dt.

    dXi = sqrt(dt) sum_orbits sqrt(W_o) [cos(xi_o.x) a_o + sin(xi_o.x) b_o],
    a, b iid standard normal (the sine term is absent for the zero orbit).
    Point covariance: E[dXi(x) dXi(y)] = dt sum_atoms w cos(xi.(x-y)).
    """

    def __init__(self, measure: SpectralMeasure):
        self.measure = measure
        grid = measure.grid
        pts = grid.points()
        rows = []
        for orbit in measure.orbits():
            phase = sum(p * c for p, c in zip(pts, orbit.xi))
            amp = np.sqrt(orbit.weight)
            rows.append(amp * np.cos(phase))
            rows.append(np.zeros(grid.shape) if orbit.is_zero else amp * np.sin(phase))
        self._basis = (np.stack(rows).reshape(len(rows), -1)
                       if rows else np.zeros((0, np.prod(grid.shape, dtype=int))))

    @property
    def n_components(self) -> int:
        return self._basis.shape[0]

    def sample(self, dt: float, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        """(n_samples, *shape) field increments."""
        draws = rng.standard_normal((n_samples, self.n_components))
        flat = (np.sqrt(dt) * draws) @ self._basis
        return flat.reshape((n_samples,) + self.measure.grid.shape)

    def project_sample(self, dt: float, n_samples: int, rng: np.random.Generator,
                       test_fields: list[Field]) -> np.ndarray:
        """Pairings <dXi, phi>_{L2} without materializing the fields;
        returns (n_samples, len(test_fields))."""
        grid = self.measure.grid
        proj = np.stack([grid.cell_volume * (self._basis @ f.values.ravel().real)
                         for f in test_fields], axis=1)
        draws = rng.standard_normal((n_samples, self.n_components))
        return (np.sqrt(dt) * draws) @ proj


@dataclass
class CovarianceCheck:
    empirical: float
    analytic: float
    rel_err: float
    mode: str  # "relative" or "absolute"
    band: float  # 3 sigma / sqrt(M) acceptance band for the absolute mode
    passed: bool


def covariance_analytic(measure: SpectralMeasure, phi: Field, psi: Field, dt: float) -> float:
    """dt * sum_atoms w F(phi) conj(F(psi)) (real for real test fields)."""
    phat = forward_values(phi.values, phi.grid)
    shat = forward_values(psi.values, psi.grid)
    w_asc = np.fft.fftshift(measure.weights_fft)
    val = dt * np.sum(w_asc * phat * np.conj(shat))
    return float(val.real)


def covariance_check(measure: SpectralMeasure, phi: Field, psi: Field, dt: float,
                     n_samples: int, seed: int = 0) -> CovarianceCheck:
    """Empirical E[Xi(phi) Xi(psi)] over synthesized increments vs the
    spectral-measure formula.  Real test fields only (the homogeneous
    field pairs bilinearly)."""
    if n_samples < 1000:
        raise ValueError("need at least 1e3 samples for a meaningful check")
    if np.abs(phi.values.imag).max() > 0 or np.abs(psi.values.imag).max() > 0:
        raise ValueError("covariance_check expects real test fields")
    synth = NoiseSynthesizer(measure)
    pair = synth.project_sample(dt, n_samples, field_stream(seed, 0), [phi, psi])
    products = pair[:, 0] * pair[:, 1]
    empirical = float(products.mean())
    sample_std = float(products.std(ddof=1))
    analytic = covariance_analytic(measure, phi, psi, dt)
    scale = dt * measure.total_mass() * max(
        float(np.abs(forward_values(phi.values, phi.grid)).max()
              * np.abs(forward_values(psi.values, psi.grid)).max()), 1e-300)
    band = 3.0 * sample_std / np.sqrt(n_samples)
    if abs(analytic) < 1e-9 * scale:
        # the floor covers pairings that are exact zeros up to round-off
        passed = bool(abs(empirical) <= max(band, 1e-12 * scale))
        return CovarianceCheck(empirical, analytic, float("nan"), "absolute", band, passed)
    rel = abs(empirical - analytic) / abs(analytic)
    return CovarianceCheck(empirical, analytic, rel, "relative", band, rel < 0.05)
