"""The linear propagator: time-stepping i du/dt = -(Op(a)+Op(a1)+Op(m1)+Op(m0))u.

Writing G for the assembled generator, the flow is du/dt = i G u and the
propagator is S(t) = exp(i t G) realized by one of two schemes:

  * split_step: Strang splitting, for bundles that separate into a
    xi-only kinetic part and an x-only potential (unconditionally stable,
    exactly unitary for real symbols);
  * rk4: classical RK4 on the separable-symbol application, for genuinely
    x-dependent principal symbols, gated by the CFL rule
    dt <= c_cfl h^2 / C_ell.

The discrete propagator is the composition of single steps, so the
semigroup identity S(s+t) = S(t)S(s) holds exactly on grid-aligned times
and step operators are memoized per step count for the solver sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import multiplier_apply, rk4_run, strang_run
from .grid import Field, Grid, h_zz_norm_batch
from .quantize import GeneratorBundle
from .symbols import check_ellipticity

CFL_CONSTANT = 0.2


class CFLViolation(ValueError):
    def __init__(self, dt, dt_max):
        super().__init__(f"rk4 time step dt={dt:g} violates the CFL bound "
                         f"{dt_max:g}; reduce dt or set substeps='auto'")
        self.suggested_dt = dt_max


@dataclass
class PropagatorConfig:
    """Scheme + step size for a generator bundle on a grid.

    substeps: 'reject' errors on a CFL violation, 'auto' subdivides each
    step instead.  scheme 'auto' picks split_step when the bundle allows
    it and rk4 otherwise.
    """

    grid: Grid
    bundle: GeneratorBundle
    dt: float
    scheme: str = "auto"
    substeps: str = "reject"
    ellipticity: float | None = None
    _prepared: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("auto", "split_step", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.substeps not in ("reject", "auto"):
            raise ValueError(f"unknown substeps policy {self.substeps!r}")
        self.bundle.validate(self.grid.d)
        if self.scheme == "split_step" and not self.bundle.is_split_separable():
            raise ValueError("split_step requires a bundle with x-only and xi-only parts")
        if self.scheme == "auto":
            self.scheme = "split_step" if self.bundle.is_split_separable() else "rk4"
        if self.scheme == "rk4":
            self._check_cfl()

    def _check_cfl(self):
        if self.ellipticity is None:
            # conservative default when the metric is not available
            self.ellipticity = 2.0
        dt_max = CFL_CONSTANT * self.grid.spacing**2 / self.ellipticity
        self._cfl_substeps = 1
        if self.dt > dt_max:
            if self.substeps == "reject":
                raise CFLViolation(self.dt, dt_max)
            self._cfl_substeps = int(np.ceil(self.dt / dt_max))

    def _prepare(self, dt: float) -> dict:
        """Per-(scheme, dt) arrays for the stepping kernels, cached."""
        key = (self.scheme, dt)
        if key in self._prepared:
            return self._prepared[key]
        if self.scheme == "split_step":
            kin = self.bundle.xi_multiplier(self.grid)
            pot = self.bundle.x_potential(self.grid)
            prep = {
                "exp_kin": np.exp(1j * dt * kin),
                "exp_v_half": np.exp(1j * (dt / 2) * pot),
            }
        else:
            cxs, mxis = self.bundle.combined_factors(self.grid)
            prep = {"cxs": 1j * cxs, "mxis": mxis}
        self._prepared[key] = prep
        return prep

    def step_values(self, vals: np.ndarray, steps: int, dt: float | None = None) -> np.ndarray:
        dt = self.dt if dt is None else dt
        if steps == 0:
            return vals.copy()
        prep = self._prepare(dt)
        if self.scheme == "split_step":
            return strang_run(vals, prep["exp_v_half"], prep["exp_kin"], steps)
        sub = getattr(self, "_cfl_substeps", 1)
        if sub > 1:
            prep = self._prepare(dt / sub)
            return rk4_run(vals, prep["cxs"], prep["mxis"], dt / sub, steps * sub)
        return rk4_run(vals, prep["cxs"], prep["mxis"], dt, steps)


def evolve(u0: Field, t: float, cfg: PropagatorConfig) -> Field:
    """S(t) u0.  t >= 0; t = 0 returns u0 exactly.

    Grid-aligned times run whole steps; a fractional remainder runs one
    shorter step (exact for multiplier flows, same order for rk4).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if u0.grid != cfg.grid:
        raise ValueError("field grid does not match propagator grid")
    if t == 0.0:
        return u0.copy()
    steps = int(round(t / cfg.dt))
    rem = t - steps * cfg.dt
    vals = cfg.step_values(u0.values, steps)
    if abs(rem) > 1e-12 * max(t, cfg.dt):
        if rem < 0:  # t slightly below a grid multiple: back off one step
            steps -= 1
            rem += cfg.dt
            vals = cfg.step_values(u0.values, steps)
        vals = cfg.step_values(vals, 1, dt=rem)
    return Field(u0.grid, vals, dict(u0.meta))


def propagator_operator(t_from: float, t_to: float, cfg: PropagatorConfig):
    """The linear map f -> S(t_to - t_from) f (step arrays memoized in cfg)."""
    if t_to < t_from:
        raise ValueError("t_to must be >= t_from")
    delta = t_to - t_from

    def apply(f: Field) -> Field:
        return evolve(f, delta, cfg)
    return apply


def free_multiplier_evolve(u0: Field, t: float, kin_fft: np.ndarray) -> Field:
    """Exact reference flow exp(i t K(D)) u0 for xi-only generators."""
    return Field(u0.grid, multiplier_apply(u0.values, np.exp(1j * t * kin_fft)), dict(u0.meta))


# -- growth bound --------------------------------------------------------------

@dataclass
class GrowthReport:
    """Norm history against the exponential envelope exp(C t) ||u0||.

    fitted_C is the smallest constant for which the envelope dominates at
    every sample time; lsq_C is the least-squares slope of the log-norm
    history (intercept pinned at log ||u0||); residual_rel is the largest
    relative misfit of the norms against the lsq envelope.
    """

    times: np.ndarray
    norms: np.ndarray
    fitted_C: float
    lsq_C: float
    residual_rel: float
    z: int
    zeta: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.fitted_C) and self.residual_rel < 0.05)

    def to_rows(self):
        env = self.norms[0] * np.exp(self.fitted_C * self.times)
        return [(float(t), float(nv), float(bd))
                for t, nv, bd in zip(self.times, self.norms, env)]


def fit_growth(times: np.ndarray, norms: np.ndarray, z: int, zeta: int) -> GrowthReport:
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if norms[0] == 0.0:
        return GrowthReport(times, norms, 0.0, 0.0, 0.0, z, zeta)
    if not np.all(np.isfinite(norms)):
        bad = int(np.argmax(~np.isfinite(norms)))
        raise OverflowError(f"norm blow-up at t={times[bad]:g}")
    y = np.log(norms / norms[0])
    pos = times > 0
    fitted = float(max(0.0, np.max(y[pos] / times[pos]))) if np.any(pos) else 0.0
    lsq = float(np.sum(times[pos] * y[pos]) / np.sum(times[pos] ** 2)) if np.any(pos) else 0.0
    env = norms[0] * np.exp(lsq * times)
    residual = float(np.max(np.abs(env - norms) / norms)) if np.all(norms > 0) else float("inf")
    return GrowthReport(times, norms, fitted, lsq, residual, z, zeta)


def growth_bound_check(u0_set: list[Field], times, z: int, zeta: int,
                       cfg: PropagatorConfig) -> GrowthReport:
    """Fit the envelope constant over a set of initial data.

    Returns the report of the worst (largest fitted C) member; the fit is
    per-datum since the envelope normalizes by each ||u0||.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must increase and start at 0")
    worst = None
    for u0 in u0_set:
        norms = []
        current = u0
        prev_t = 0.0
        for t in times:
            current = evolve(current, t - prev_t, cfg)
            prev_t = t
            norms.append(float(h_zz_norm_batch(current.values, cfg.grid, z, zeta)))
        rep = fit_growth(times, np.asarray(norms), z, zeta)
        if worst is None or rep.fitted_C > worst.fitted_C:
            worst = rep
    return worst
