"""Verification suites: executable versions of the estimates the solver
theory rests on.  Each suite returns named checks with measured values;
the CLI serializes them and sets the exit status, and the acceptance
tests assert them directly.

Batteries are fixed at desk scale (d=1, n=256, L=16 defaults from the run
config) so every suite completes in seconds to a few minutes.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np

from .config import build_grid, resolve_config
from .grid import (
    Field,
    Grid,
    NormSpec,
    algebra_constant_probe,
    forward_transform,
    gaussian_field,
    h_zz_norm,
    l2_norm,
    zero_field,
)
from .noise import (
    NoiseSynthesizer,
    build_cm_basis,
    correlation_from_spectral,
    covariance_check,
    field_stream,
    spectral_atoms,
    spectral_from_correlation,
    spectral_gaussian_density,
)
from .propagate import PropagatorConfig, evolve, growth_bound_check
from .quantize import GeneratorBundle, free_bundle
from .solve import (
    LocalityBall,
    Nonlinearity,
    SolveConfig,
    Trajectory,
    ball_probes,
    em_solve,
    free_trajectory,
    lip_constants,
    pick_horizon,
    picard_solve,
    residual_check,
    shrink_horizon_to_ball,
)
from .stochastic import (
    hs_bound,
    hs_convention_fixture,
    hs_kappa,
    hs_norm_direct,
    hs_report,
    ito_isometry_check,
    sample_path,
)
from .symbols import (
    Symbol,
    SymbolOrder,
    build_hamiltonian,
    build_lower_metric_term,
    check_ellipticity,
    check_symbol_estimates,
    metric_flat,
    metric_gauss_bump,
    metric_rational_decay,
)

SUITE_NAMES = ("symbols", "norms", "propagator", "noise", "isometry", "hs", "contraction")


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        val = "" if self.value is None else f" value={self.value:.4g}"
        det = f" ({self.detail})" if self.detail else ""
        return f"[{tag}] {self.name}{val}{det}"


@dataclass
class SuiteResult:
    suite: str
    checks: list[Check] = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> csv text
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def verdicts(self) -> dict:
        return {c.name: bool(c.passed) for c in self.checks}


def _desk_grid(cfg: dict) -> Grid:
    return build_grid(cfg)


# -- symbols ---------------------------------------------------------------------

def suite_symbols(cfg: dict, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("symbols")
    families = {
        "flat": metric_flat(1),
        "gauss_bump": metric_gauss_bump(1),
        "rational_decay": metric_rational_decay(1),
    }
    csv = io.StringIO()
    for name, metric in families.items():
        for label, sym in (("hamiltonian", build_hamiltonian(metric)),
                           ("lower_metric", build_lower_metric_term(metric))):
            rep = check_symbol_estimates(sym, 2, 2)
            res.checks.append(Check(f"symbols/{name}/{label}", rep.passed,
                                    max(e.constant for e in rep.entries)))
            csv.write(f"# {name}/{label}\n")
            csv.write(rep.to_csv())
        C = check_ellipticity(metric)
        res.checks.append(Check(f"symbols/{name}/ellipticity", np.isfinite(C) and C >= 1.0, C))
    control = Symbol(eval=lambda x, xi: np.exp(np.linalg.norm(x, axis=-1)) + 0j,
                     order=SymbolOrder(0.0, 0.0), name="exp-growth-control")
    rep = check_symbol_estimates(control, 0, 0)
    res.checks.append(Check("symbols/control-case-fails", not rep.passed,
                            max(e.constant for e in rep.entries),
                            "declared order (0,0) must be rejected"))
    res.tables["symbol_estimates"] = csv.getvalue()
    res.elapsed = time.perf_counter() - t0
    return res


# -- norms -----------------------------------------------------------------------

def suite_norms(cfg: dict, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("norms")
    grid = _desk_grid(cfg)
    rng = np.random.default_rng(seed)

    worst = 0.0
    for _ in range(5):
        f = Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
        lhs = l2_norm(f) ** 2
        rhs = (2 * np.pi) ** (-grid.d) * l2_norm(forward_transform(f)) ** 2
        worst = max(worst, abs(lhs - rhs) / lhs)
    res.checks.append(Check("norms/parseval", worst < 1e-10, worst))

    g = gaussian_field(grid)
    val = h_zz_norm(g, 0, 0)
    res.checks.append(Check("norms/gaussian-l2", abs(val - np.pi**0.25) < 1e-8, val))

    if grid.d == 1:
        xi = grid.freq_axis()
        spec_err = float(np.abs(forward_transform(g).values
                                - np.sqrt(2 * np.pi) * np.exp(-(xi**2) / 2)).max())
        res.checks.append(Check("norms/gaussian-transform", spec_err < 1e-8, spec_err))

    ok = True
    z, zeta = 1, 1
    env = np.exp(-sum(a**2 for a in grid.points()) / 8.0)
    for _ in range(4):
        f = Field(grid, env * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)))
        from .grid import sobolev_kato_norm
        summands = [sobolev_kato_norm(f, z - j, j + zeta) for j in range(z + 1)]
        hzz = h_zz_norm(f, z, zeta)
        ok = ok and sobolev_kato_norm(f, z, zeta) <= hzz + 1e-12
        ok = ok and hzz <= (z + 1) * max(summands) + 1e-12
    res.checks.append(Check("norms/embedding-chain", ok))

    vals = []
    for n in (grid.n, grid.n * 2):
        gg = Grid(grid.d, n, grid.half_width)
        u = gaussian_field(gg)
        vals.append(algebra_constant_probe(0, grid.d, [(u, u)]))
    drift = abs(vals[1] - vals[0]) / vals[0]
    res.checks.append(Check("norms/algebra-constant-stable", drift < 0.05, vals[1],
                            f"resolution drift {drift:.3%}"))
    res.elapsed = time.perf_counter() - t0
    return res


# -- propagator --------------------------------------------------------------------

GROWTH_PAIRS = ((0, 0), (1, 0), (0, 1), (1, 1))


def suite_propagator(cfg: dict, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("propagator")
    grid = _desk_grid(cfg)

    tick = time.perf_counter()
    prop = PropagatorConfig(grid, free_bundle(metric_flat(grid.d)), 1e-3)
    u0 = gaussian_field(grid)
    out = evolve(u0, 1.0, prop)
    if grid.d == 1:
        x = grid.axis()
        s = 1 + 1j
        exact = np.exp(-(x**2) / (2 * s)) / np.sqrt(s)
        err = l2_norm(Field(grid, out.values - exact))
        res.checks.append(Check("propagator/free-gaussian-l2-error", err < 1e-4, err))
    drift = abs(l2_norm(out) - l2_norm(u0))
    res.checks.append(Check("propagator/free-gaussian-l2-drift", drift < 1e-8, drift))
    res.checks.append(Check("propagator/free-gaussian-runtime",
                            time.perf_counter() - tick < 10.0, time.perf_counter() - tick,
                            "seconds; budget 10"))

    csv = io.StringIO()
    csv.write("metric,z,zeta,fitted_C,lsq_C,residual_rel,verdict\n")
    times = np.linspace(0.0, 1.0, 11)
    for name, metric in (("flat", metric_flat(grid.d)), ("gauss_bump", metric_gauss_bump(grid.d))):
        ell = check_ellipticity(metric)
        prop = PropagatorConfig(grid, free_bundle(metric), 1e-3, ellipticity=ell)
        data = [gaussian_field(grid), gaussian_field(grid, width=1.4, amp=0.8)]
        for z, zeta in GROWTH_PAIRS:
            rep = growth_bound_check(data, times, z, zeta, prop)
            ok = bool(np.isfinite(rep.fitted_C) and rep.residual_rel < 0.05)
            res.checks.append(Check(f"propagator/growth/{name}/z{z}zeta{zeta}", ok,
                                    rep.fitted_C, f"residual {rep.residual_rel:.3%}"))
            csv.write(f"{name},{z},{zeta},{rep.fitted_C:.6e},{rep.lsq_C:.6e},"
                      f"{rep.residual_rel:.6e},{'PASS' if ok else 'FAIL'}\n")
    res.tables["growth"] = csv.getvalue()
    res.elapsed = time.perf_counter() - t0
    return res


# -- noise ------------------------------------------------------------------------

def _pair_measure(grid: Grid, mass: float = 1.0, mode: int = 4):
    xi0 = mode * grid.freq_spacing
    return spectral_atoms(grid, [(xi0, mass / 2), (-xi0, mass / 2)])


def suite_noise(cfg: dict, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("noise")
    grid = _desk_grid(cfg)

    dens = spectral_gaussian_density(grid, width=1.0, cutoff=8.0)
    if grid.d == 1:
        res.checks.append(Check("noise/gaussian-density-mass",
                                abs(dens.total_mass() - np.sqrt(np.pi)) < 1e-6,
                                dens.total_mass()))
    pair = _pair_measure(grid)
    corr = correlation_from_spectral(pair)
    back = spectral_from_correlation(corr)
    expected = np.fft.fftshift(pair.weights_fft) / grid.freq_spacing**grid.d
    rt = float(np.abs(back - expected).max())
    res.checks.append(Check("noise/correlation-round-trip", rt < 1e-10, rt))

    basis = build_cm_basis(dens, 16)
    gram_err = float(np.abs(basis.gram_matrix() - np.eye(16)).max())
    res.checks.append(Check("noise/gram-identity", gram_err < 1e-10, gram_err))

    full = build_cm_basis(dens, len(dens.orbits()))
    gfun = lambda xi: float(np.exp(-np.sum(xi * xi) / 3.0))
    coeffs = np.cumsum(full.coefficients(gfun) ** 2)
    target = sum(o.weight * gfun(o.xi) ** 2 for o in dens.orbits())
    bessel_ok = bool(np.all(np.diff(coeffs) >= -1e-15) and coeffs[-1] <= target + 1e-12
                     and abs(coeffs[-1] - target) < 1e-9 * max(target, 1.0))
    res.checks.append(Check("noise/bessel-completeness", bessel_ok, float(coeffs[-1])))

    # covariance battery at 1e4 samples
    csv = io.StringIO()
    csv.write("measure,pair,mode,empirical,analytic,rel_err,verdict\n")
    x = grid.points()[0] if grid.d == 1 else sum(grid.points())
    phi = gaussian_field(grid)
    psi = Field(grid, (np.cos(4 * grid.freq_spacing * x) * np.exp(-x * x / 8)).astype(complex))
    battery = [("atom-pair", pair), ("gaussian-density", dens)]
    for mname, m in battery:
        for pname, (a, b) in (("phi-phi", (phi, phi)), ("phi-psi", (phi, psi))):
            chk = covariance_check(m, Field(grid, a.values.real + 0j),
                                   Field(grid, b.values.real + 0j), 0.01, 10000,
                                   seed=seed + 17)
            res.checks.append(Check(f"noise/covariance/{mname}/{pname}", chk.passed,
                                    chk.rel_err if chk.mode == "relative" else chk.empirical,
                                    chk.mode))
            csv.write(f"{mname},{pname},{chk.mode},{chk.empirical:.6e},{chk.analytic:.6e},"
                      f"{chk.rel_err:.6e},{'PASS' if chk.passed else 'FAIL'}\n")
    res.tables["covariance"] = csv.getvalue()

    synth = NoiseSynthesizer(pair)
    draws = synth.sample(0.01, 10000, field_stream(seed, 0))
    flat_idx = (slice(None), grid.n // 3) if grid.d == 1 else (slice(None), grid.n // 3, grid.n // 3)
    zs = draws[flat_idx] / draws[flat_idx].std()
    skew, kurt = float(np.mean(zs**3)), float(np.mean(zs**4) - 3.0)
    res.checks.append(Check("noise/increment-skewness", abs(skew) < 0.1, skew))
    res.checks.append(Check("noise/increment-kurtosis", abs(kurt) < 0.2, kurt))

    if grid.d == 1:
        offset = 16
        pairs = [(30, 30 + offset), (100, 100 + offset), (180, 180 + offset)]
        covs = [float(np.mean(draws[:, a] * draws[:, b])) for a, b in pairs]
        scale = 0.01 * pair.total_mass()
        dev = (max(covs) - min(covs)) / scale
        res.checks.append(Check("noise/spatial-homogeneity", dev < 0.05, dev,
                                "translated-pair covariance spread"))
    res.elapsed = time.perf_counter() - t0
    return res


# -- isometry -----------------------------------------------------------------------

def _isometry_battery(grid: Grid):
    pair = _pair_measure(grid)
    dens = spectral_gaussian_density(grid, width=1.0, cutoff=4.0)
    basis_pair = build_cm_basis(pair)
    basis_dens = build_cm_basis(dens, 8)
    g = gaussian_field(grid)
    prop = PropagatorConfig(grid, free_bundle(metric_flat(grid.d)), 1e-3)

    def const_mode(k, s, j, e):
        return Field(grid, 0.8 * e.values) if j == 0 else zero_field(grid)

    def ramp(k, s, j, e):
        return Field(grid, (1.0 + 2.0 * s) * e.values)

    def propagated(k, s, j, e):
        return evolve(Field(grid, g.values * e.values), 0.08 - s, prop)

    return [("constant-one-mode", const_mode, basis_pair, 8),
            ("time-ramp", ramp, basis_pair, 8),
            ("propagated-multimode", propagated, basis_dens, 8)]


def suite_isometry(cfg: dict, seed: int = 0, n_samples: int = 10000) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("isometry")
    grid = _desk_grid(cfg)
    spec = NormSpec(z=0, zeta=1)
    csv = io.StringIO()
    csv.write("integrand,samples,lhs,rhs,rel_err,verdict\n")
    battery = _isometry_battery(grid)
    for name, integrand, basis, steps in battery:
        chk = ito_isometry_check(integrand, 0.01, steps, n_samples, spec, basis, seed=seed + 1)
        ok = chk.rel_err < 0.05
        res.checks.append(Check(f"isometry/{name}", ok, chk.rel_err, f"{n_samples} paths"))
        csv.write(f"{name},{n_samples},{chk.lhs:.6e},{chk.rhs:.6e},{chk.rel_err:.6e},"
                  f"{'PASS' if ok else 'FAIL'}\n")

    # error contraction under 4x the paths: RMS over battery x replicates
    reps = range(4)
    small = [ito_isometry_check(i, 0.01, st, n_samples, spec, b, seed=seed + 100 + r).rel_err
             for (nm, i, b, st) in battery for r in reps]
    big = [ito_isometry_check(i, 0.01, st, 4 * n_samples, spec, b, seed=seed + 200 + r).rel_err
           for (nm, i, b, st) in battery for r in reps]
    rms = lambda v: float(np.sqrt(np.mean(np.square(v))))
    ratio = rms(big) / rms(small)
    res.checks.append(Check("isometry/error-halves-at-4x-paths", 0.25 <= ratio <= 0.75,
                            ratio, "target 0.5 +- 50%"))
    res.tables["isometry"] = csv.getvalue()
    res.elapsed = time.perf_counter() - t0
    return res


# -- hilbert-schmidt -----------------------------------------------------------------

HS_METRICS = (("flat", metric_flat), ("gauss_bump", metric_gauss_bump),
              ("rational_decay", metric_rational_decay))


def suite_hs(cfg: dict, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("hs")
    grid = _desk_grid(cfg)
    z, zeta = 0, 1
    w = gaussian_field(grid)
    ball = LocalityBall(w, h_zz_norm(w, z, zeta))
    probes = ball_probes(ball, 8, z, zeta, seed=seed)

    # convention fixture: single atom at 0, identity diffusion, t = s
    fixture_measure = spectral_atoms(grid, [(0.0, 0.8)])
    fix_basis = build_cm_basis(fixture_measure)
    flat_prop = PropagatorConfig(grid, free_bundle(metric_flat(grid.d)), 1e-3)
    direct, closed = hs_convention_fixture(w, fix_basis, flat_prop, z, zeta)
    conv_err = abs(direct - closed) / closed
    res.checks.append(Check("hs/convention-fixture", conv_err < 1e-8, conv_err,
                            "direct vs closed form"))
    ident = Nonlinearity("linear", lam=1.0)
    c_ident = lip_constants(ident, ball, probes, z, zeta).sup
    fix_bound = hs_bound(w, None, 0.0, 0.0, fixture_measure, C_zz=0.0, z=z, zeta=zeta,
                         C_s=c_ident)
    kappa = hs_kappa(direct / fix_bound)
    res.checks.append(Check("hs/kappa-frozen", kappa > 0, kappa,
                            f"fixture ratio {direct / fix_bound:.3f} x headroom"))

    sigmas = (("constant-one", Nonlinearity("constant", value=1.0)),
              ("power2-ball", Nonlinearity("power", power=2, scale=1.0)))
    noises = (("atom-pair", _pair_measure(grid)),
              ("gaussian-density", spectral_gaussian_density(grid, width=1.0, cutoff=4.0, mass=1.0)))
    csv = io.StringIO()
    csv.write("metric,noise,sigma,direct,bound,ratio,kappa,verdict\n")
    times = np.linspace(0.0, 0.2, 5)
    for mname, mfam in HS_METRICS:
        metric = mfam(grid.d)
        ell = check_ellipticity(metric)
        prop = PropagatorConfig(grid, free_bundle(metric), 1e-3, ellipticity=ell)
        C_zz = growth_bound_check([w], times, z, zeta, prop).fitted_C
        for nname, measure in noises:
            basis = build_cm_basis(measure)
            for sname, sigma in sigmas:
                C_s = lip_constants(sigma, ball, probes, z, zeta).sup
                direct = hs_norm_direct(w, lambda s, f: sigma.nemytskii(s, f), 0.05, 0.0,
                                        basis, prop, z, zeta)
                bound = hs_bound(w, None, 0.05, 0.0, measure, C_zz=C_zz, z=z, zeta=zeta, C_s=C_s)
                rep = hs_report(direct, bound, kappa)
                res.checks.append(Check(f"hs/dominance/{mname}/{nname}/{sname}",
                                        rep.passed, rep.ratio, f"kappa {kappa:.3f}"))
                csv.write(f"{mname},{nname},{sname},{direct:.6e},{bound:.6e},"
                          f"{rep.ratio:.6e},{kappa:.6e},{'PASS' if rep.passed else 'FAIL'}\n")
    res.tables["hs"] = csv.getvalue()

    dens = spectral_gaussian_density(grid, width=1.0, cutoff=8.0, mass=1.0)
    sigma = Nonlinearity("power", power=2, scale=1.0)
    vals = []
    for J in (16, 32):
        basis = build_cm_basis(dens, J)
        vals.append(hs_norm_direct(w, lambda s, f: sigma.nemytskii(s, f), 0.05, 0.0,
                                   basis, flat_prop, z, zeta))
    change = abs(vals[1] - vals[0]) / vals[1]
    res.checks.append(Check("hs/truncation-convergence", change < 0.01, change,
                            "J -> 2J relative change"))
    res.elapsed = time.perf_counter() - t0
    return res


# -- contraction ----------------------------------------------------------------------

@dataclass
class ContractionProblem:
    name: str
    metric_name: str
    gamma: Nonlinearity
    sigma: Nonlinearity
    noise: str  # "pair" | "density"
    mass: float
    T: float


CONTRACTION_BATTERY = (
    ContractionProblem("flat-linear", "flat", Nonlinearity("linear", lam=1.5),
                       Nonlinearity("linear", lam=0.5), "pair", 1.0, 0.1),
    ContractionProblem("bump-power2-additive", "gauss_bump",
                       Nonlinearity("power", power=2, scale=0.5),
                       Nonlinearity("constant", value=0.3), "density", 1.0, 0.08),
    ContractionProblem("rational-linear-power2", "rational_decay",
                       Nonlinearity("linear", lam=1.2),
                       Nonlinearity("power", power=2, scale=0.1), "pair", 0.5, 0.1),
)

METRIC_BY_NAME = {"flat": metric_flat, "gauss_bump": metric_gauss_bump,
                  "rational_decay": metric_rational_decay}


def _problem_setup(prob: ContractionProblem, grid: Grid, dt: float, seed: int):
    metric = METRIC_BY_NAME[prob.metric_name](grid.d)
    ell = check_ellipticity(metric)
    prop = PropagatorConfig(grid, free_bundle(metric), dt, ellipticity=ell)
    if prob.noise == "pair":
        measure = _pair_measure(grid, mass=prob.mass)
    else:
        measure = spectral_gaussian_density(grid, width=1.0, cutoff=4.0, mass=prob.mass)
    scfg = SolveConfig(grid, prop, measure, z=0, zeta=1, dt=dt, T=prob.T, seed=seed)
    u0 = gaussian_field(grid)
    ball = LocalityBall(u0, h_zz_norm(u0, 0, 1))
    probes = ball_probes(ball, 8, 0, 1, seed=seed)
    sup_C = max(lip_constants(prob.gamma, ball, probes, 0, 1).sup,
                lip_constants(prob.sigma, ball, probes, 0, 1).sup)
    times = np.linspace(0.0, prob.T, 6)
    C_zz = growth_bound_check([u0], times, 0, 1, prop).fitted_C
    horizon = pick_horizon(prob.T, dt, sup_C, C_zz, measure.total_mass())
    horizon, v0 = shrink_horizon_to_ball(u0, scfg, horizon, ball)
    return scfg, u0, ball, horizon, v0


def suite_contraction(cfg: dict, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    res = SuiteResult("contraction")
    grid = _desk_grid(cfg)
    dt = float(cfg["discretization"]["dt"])
    csv = io.StringIO()
    csv.write("problem,T0,K,iterations,max_ratio,ratio_bound,residual,verdict\n")
    for prob in CONTRACTION_BATTERY:
        scfg, u0, ball, horizon, v0 = _problem_setup(prob, grid, dt, seed)
        steps = int(round(horizon.T0 / dt))
        path = sample_path(len(scfg.basis.modes), dt, steps, seed=seed + 7, sample_index=0)
        traj = picard_solve(u0, scfg, prob.gamma, prob.sigma, path, T0=horizon.T0,
                            initial=v0, ball=ball)
        ratios = traj.diagnostics["picard_ratios"]
        max_ratio = max(ratios) if ratios else 0.0
        bound = 1.5 * horizon.K
        ok_ratio = max_ratio <= bound
        res.checks.append(Check(f"contraction/{prob.name}/ratios", ok_ratio, max_ratio,
                                f"bound 1.5K = {bound:.3f}"))
        resid = residual_check(traj, path, scfg, prob.gamma, prob.sigma, u0)
        ok_resid = resid <= 10 * scfg.picard_tol
        res.checks.append(Check(f"contraction/{prob.name}/residual", ok_resid, resid,
                                f"budget {10 * scfg.picard_tol:g}"))
        zero_init = Trajectory(scfg.times(horizon.T0),
                               np.zeros((steps + 1,) + grid.shape, dtype=complex), grid)
        other = picard_solve(u0, scfg, prob.gamma, prob.sigma, path, T0=horizon.T0,
                             initial=zero_init, ball=ball)
        gap = traj.sup_distance(other, 0, 1)
        res.checks.append(Check(f"contraction/{prob.name}/two-guesses", gap < 2 * scfg.picard_tol,
                                gap, f"budget {2 * scfg.picard_tol:g}"))
        # monotonicity: halving the horizon shrinks the worst ratio
        half_T0 = max(dt, dt * (steps // 2))
        half_v0 = free_trajectory(u0, scfg, half_T0)
        half = picard_solve(u0, scfg, prob.gamma, prob.sigma, path, T0=half_T0,
                            initial=half_v0, ball=ball)
        half_ratios = half.diagnostics["picard_ratios"]
        ok_mono = (max(half_ratios) if half_ratios else 0.0) < max_ratio
        res.checks.append(Check(f"contraction/{prob.name}/ratio-shrinks-with-T0", ok_mono,
                                max(half_ratios) if half_ratios else 0.0))
        csv.write(f"{prob.name},{horizon.T0:.4f},{horizon.K:.4f},"
                  f"{traj.diagnostics['picard_iterations']},{max_ratio:.4f},{bound:.4f},"
                  f"{resid:.3e},{'PASS' if ok_ratio and ok_resid else 'FAIL'}\n")
    res.tables["contraction"] = csv.getvalue()

    # mean-square a-priori bound over a small Monte Carlo batch
    prob = CONTRACTION_BATTERY[0]
    scfg, u0, ball, horizon, v0 = _problem_setup(prob, grid, dt, seed)
    steps = int(round(horizon.T0 / dt))
    ms_vals = []
    for p in range(100):
        path = sample_path(len(scfg.basis.modes), dt, steps, seed=seed + 31, sample_index=p)
        traj = em_solve(u0, scfg, prob.gamma, prob.sigma, path, T0=horizon.T0)
        ms_vals.append(float(np.sum(traj.norms**2) * dt))
    ms = float(np.mean(ms_vals))
    v0n = float(np.sum(h_zz_norm(u0, 0, 1) ** 2) * horizon.T0)
    rhs = 3.0 * (v0n + horizon.T0 * horizon.C_T0 * (1 + horizon.mass) * (horizon.T0 + ms))
    res.checks.append(Check("contraction/mean-square-bound", ms <= rhs, ms,
                            f"a-priori aggregate {rhs:.3g}"))

    # scheme cross-check: both solvers converge to the same dt -> 0 limit
    ladder = _scheme_ladder(grid, seed)
    res.checks.append(Check("contraction/em-vs-picard-order", ladder["order_em"] >= 0.9,
                            ladder["order_em"], "dt-halving ladder vs picard reference"))
    res.checks.append(Check("contraction/picard-vs-em-order", ladder["order_picard"] >= 0.9,
                            ladder["order_picard"], "dt-halving ladder vs em reference"))
    res.checks.append(Check("contraction/equal-dt-agreement",
                            ladder["equal_dt_gap"] <= 10 * ladder["tol"],
                            ladder["equal_dt_gap"]))
    res.tables["scheme_ladder"] = ladder["csv"]
    res.elapsed = time.perf_counter() - t0
    return res


def _scheme_ladder(grid: Grid, seed: int) -> dict:
    """em and picard on a linear-drift problem across a dt ladder, each
    measured against the other scheme at the finest dt."""
    gamma = Nonlinearity("linear", lam=1.0)
    sigma = Nonlinearity("zero")
    T = 0.1
    ladder = (4e-3, 2e-3, 1e-3)
    fine = 1.25e-4

    def solve_with(dt, method, tol=1e-12):
        metric = metric_flat(grid.d)
        prop = PropagatorConfig(grid, free_bundle(metric), dt)
        measure = _pair_measure(grid)
        scfg = SolveConfig(grid, prop, measure, z=0, zeta=1, dt=dt, T=T, seed=seed,
                           picard_tol=tol, picard_max_iters=200)
        u0 = gaussian_field(grid)
        steps = int(round(T / dt))
        from .stochastic import zero_path
        path = zero_path(len(scfg.basis.modes), dt, steps)
        if method == "em":
            return em_solve(u0, scfg, gamma, sigma, path)
        return picard_solve(u0, scfg, gamma, sigma, path)

    ref_pic = solve_with(fine, "picard")
    ref_em = solve_with(fine, "em")

    def sup_err(traj, ref):
        stride = int(round((len(ref.times) - 1) / (len(traj.times) - 1)))
        diff = traj.values - ref.values[::stride]
        from .grid import h_zz_norm_batch
        return float(h_zz_norm_batch(diff, grid, 0, 1).max())

    errs_em = [sup_err(solve_with(dt, "em"), ref_pic) for dt in ladder]
    errs_pic = [sup_err(solve_with(dt, "picard"), ref_em) for dt in ladder]

    def fit_order(errs):
        ld = np.log2(np.asarray(ladder))
        le = np.log2(np.asarray(errs))
        return float(np.polyfit(ld, le, 1)[0])

    tol = 1e-9
    em_same = solve_with(1e-3, "em")
    pic_same = solve_with(1e-3, "picard", tol=tol)
    gap = em_same.sup_distance(pic_same, 0, 1)
    csv = "dt,err_em_vs_picard_ref,err_picard_vs_em_ref\n" + "\n".join(
        f"{dt:g},{a:.6e},{b:.6e}" for dt, a, b in zip(ladder, errs_em, errs_pic))
    return {"order_em": fit_order(errs_em), "order_picard": fit_order(errs_pic),
            "equal_dt_gap": gap, "tol": tol, "csv": csv + "\n"}


SUITES = {
    "symbols": suite_symbols,
    "norms": suite_norms,
    "propagator": suite_propagator,
    "noise": suite_noise,
    "isometry": suite_isometry,
    "hs": suite_hs,
    "contraction": suite_contraction,
}


def run_suites(names, cfg: dict | None = None, seed: int = 0) -> list[SuiteResult]:
    cfg = resolve_config(cfg or {})
    if names == "all" or names == ["all"]:
        names = list(SUITE_NAMES)
    if isinstance(names, str):
        names = [names]
    results = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; pick from {SUITE_NAMES + ('all',)}")
        results.append(SUITES[name](cfg, seed=seed))
    return results
