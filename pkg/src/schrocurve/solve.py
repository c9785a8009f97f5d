"""Semilinear mild-solution engine.

The discrete integral map on a time grid t_k = k dt is

    (T u)(t) = S(t) u0 - i sum_{s_k < t} S(t - s_k) gamma(s_k, u(s_k)) dt
                        - i sum_{s_k < t} S(t - s_k) sigma(s_k, u(s_k)) dXi_k,

with dXi_k = sum_j e_j dW_{j,k} over the Cameron-Martin modes and both
sums at left endpoints (Ito convention; the drift matches it).  Because
the discrete propagator is an exact semigroup, T is evaluated in one
O(steps) sweep with running accumulators instead of the literal double
sum.  picard_solve iterates T to its fixed point; em_solve is the
single-pass stepping scheme, which is exactly the forward substitution of
the same lower-triangular system (so the two agree to solver tolerance at
any dt and share one dt -> 0 limit).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Grid, h_zz_norm, h_zz_norm_batch
from .noise import CameronMartinBasis, SpectralMeasure, build_cm_basis
from .propagate import PropagatorConfig, evolve
from .stochastic import WienerPath

PICARD_RATIO_MARGIN = 1.5
BALL_SLACK = 1.001  # tolerated overshoot before declaring a ball exit


class BallExit(RuntimeError):
    """An iterate left the locality ball where the Lipschitz constants were
    measured; the local solution theory only holds inside it."""


class PicardDivergence(RuntimeError):
    def __init__(self, msg, distances):
        super().__init__(msg)
        self.distances = distances


# -- nonlinearities -------------------------------------------------------------

@dataclass
class LocalityBall:
    center: Field
    radius: float

    def contains(self, norm_dist: float) -> bool:
        return norm_dist <= self.radius * BALL_SLACK


@dataclass
class Nonlinearity:
    """Nemytskii nonlinearity g(t, x, u) acting pointwise on field values."""

    kind: str  # zero | constant | linear | power | custom
    lam: complex = 0.0  # linear coefficient
    power: int = 2
    scale: complex = 1.0  # coefficient of the power term
    value: complex = 1.0  # constant kind (additive term)
    fn: object = None  # custom (t, xpoints, values) -> values
    ball: LocalityBall | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "linear", "power", "custom"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power" and self.power < 1:
            raise ValueError("power must be >= 1")

    @property
    def is_zero(self) -> bool:
        return (self.kind == "zero" or (self.kind == "linear" and self.lam == 0)
                or (self.kind == "constant" and self.value == 0))

    def nemytskii(self, t: float, f: Field) -> Field:
        if self.kind == "zero":
            return Field(f.grid, np.zeros_like(f.values))
        if self.kind == "constant":
            return Field(f.grid, np.full(f.grid.shape, self.value, dtype=complex))
        if self.kind == "linear":
            return Field(f.grid, self.lam * f.values)
        if self.kind == "power":
            return Field(f.grid, self.scale * f.values**self.power)
        vals = self.fn(t, f.grid.points(), f.values)
        if not np.all(np.isfinite(np.asarray(vals).view(float))):
            raise FloatingPointError(f"nonlinearity produced non-finite values at t={t:g}")
        return Field(f.grid, np.asarray(vals, dtype=complex))

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "constant":
            out["value"] = repr(self.value)
        if self.kind == "linear":
            out["lam"] = repr(self.lam)
        if self.kind == "power":
            out.update(power=self.power, scale=repr(self.scale))
        return out


def nonlinearity_from_config(spec: dict) -> Nonlinearity:
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return Nonlinearity("zero")
    if kind == "constant":
        return Nonlinearity("constant", value=complex(spec.get("value", 1.0)))
    if kind == "linear":
        return Nonlinearity("linear", lam=complex(spec.get("lam", 1.0)))
    if kind == "power":
        return Nonlinearity("power", power=int(spec.get("n", 2)),
                            scale=complex(spec.get("scale", 1.0)))
    raise ValueError(f"unknown nonlinearity kind {kind!r} in config")


# -- Lipschitz certification -----------------------------------------------------

def ball_probes(ball: LocalityBall, count: int, z: int, zeta: int, seed: int = 0) -> list[Field]:
    """Smooth probe fields inside the ball: center + scaled low-frequency
    perturbations at radii spread over (0, R]."""
    grid = ball.center.grid
    rng = np.random.default_rng(seed)
    x = grid.points()
    envelope = np.exp(-sum(a**2 for a in x) / 8.0)
    probes = [ball.center.copy()]
    for i in range(count - 1):
        mod = np.ones(grid.shape, dtype=complex)
        for a in x:
            k1, k2 = rng.uniform(0.3, 1.5, size=2)
            mod = mod * (rng.normal() * np.cos(k1 * a) + 1j * rng.normal() * np.sin(k2 * a))
        pert = Field(grid, envelope * mod)
        norm = h_zz_norm(pert, z, zeta)
        if norm == 0.0:
            continue
        target = ball.radius * (i + 1) / count
        probes.append(Field(grid, ball.center.values + pert.values * (target / norm)))
    return probes


@dataclass
class LipReport:
    times: np.ndarray
    values: np.ndarray  # working C(t) per probe time

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


def lip_constants(g: Nonlinearity, ball: LocalityBall, probes: list[Field],
                  z: int, zeta: int, times=None) -> LipReport:
    """Sampled C(t): max over probe pairs of the Lipschitz ratio and over
    probes of the linear-growth ratio ||g(v)|| / (1 + ||v||)."""
    grid = ball.center.grid
    times = np.asarray([0.0] if times is None else times, dtype=float)
    for v in probes:
        dist = h_zz_norm(Field(grid, v.values - ball.center.values), z, zeta)
        if not ball.contains(dist):
            raise ValueError(f"probe at distance {dist:g} is outside the ball radius {ball.radius:g}")
    out = np.zeros_like(times)
    for ti, t in enumerate(times):
        worst = 0.0
        gvals = [g.nemytskii(t, v) for v in probes]
        for i, v in enumerate(probes):
            growth = h_zz_norm(gvals[i], z, zeta) / (1.0 + h_zz_norm(v, z, zeta))
            worst = max(worst, growth)
            for k in range(i + 1, len(probes)):
                dv = h_zz_norm(Field(grid, v.values - probes[k].values), z, zeta)
                if dv == 0.0:
                    continue
                dg = h_zz_norm(Field(grid, gvals[i].values - gvals[k].values), z, zeta)
                worst = max(worst, dg / dv)
        out[ti] = worst
    return LipReport(times, out)


# -- horizon selection ------------------------------------------------------------

@dataclass
class Horizon:
    T0: float
    K: float
    C_T0: float
    C_zz: float
    sup_C: float
    mass: float
    formula: str = "K(T0) = exp(2 C_zz T0) * sup_t max(C_gamma, C_sigma)^2 * T0 * (1 + mass)"


def contraction_aggregate(T0: float, sup_C: float, C_zz: float, mass: float) -> float:
    return float(np.exp(2.0 * C_zz * T0) * sup_C**2 * T0 * (1.0 + mass))


def pick_horizon(T: float, dt: float, sup_C: float, C_zz: float, mass: float) -> Horizon:
    """Largest grid time T0 <= T with K(T0) < 1.

    K aggregates the propagator growth and the Lipschitz constants as the
    contraction argument does; the exact formula is recorded in the
    returned report.
    """
    if not np.isfinite(mass):
        raise ValueError("the spectral measure must have finite mass")
    if not np.isfinite(sup_C) or sup_C < 0:
        raise ValueError("need a finite nonnegative Lipschitz constant")
    steps = int(round(T / dt))
    if steps < 1:
        raise ValueError("T must be at least one time step")
    if sup_C == 0.0:
        return Horizon(T0=steps * dt, K=0.0, C_T0=0.0, C_zz=C_zz, sup_C=0.0, mass=mass)
    best = None
    for k in range(steps, 0, -1):
        t0 = k * dt
        if contraction_aggregate(t0, sup_C, C_zz, mass) < 1.0:
            best = t0
            break
    if best is None:
        raise ValueError(
            "no admissible horizon at this grid resolution: K(dt) >= 1 already; "
            "reduce dt, weaken the noise (mass) or the nonlinearity")
    K = contraction_aggregate(best, sup_C, C_zz, mass)
    return Horizon(T0=best, K=K, C_T0=float(np.exp(2 * C_zz * best) * sup_C**2),
                   C_zz=C_zz, sup_C=sup_C, mass=mass)


# -- configuration and trajectories ------------------------------------------------

@dataclass
class SolveConfig:
    grid: Grid
    propagator: PropagatorConfig
    measure: SpectralMeasure
    z: int
    zeta: int
    dt: float
    T: float
    n_modes: int | None = None
    picard_tol: float = 1e-6
    picard_max_iters: int = 50
    seed: int = 0
    basis: CameronMartinBasis = field(default=None, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.measure.total_mass()):
            raise ValueError("total mass must be finite")
        if self.basis is None:
            available = len(self.measure.orbits())
            count = min(64 if self.n_modes is None else self.n_modes, available)
            self.basis = build_cm_basis(self.measure, count)
        if self.zeta < 0 or self.z < 0:
            raise ValueError("z, zeta must be nonnegative")

    def times(self, T0: float) -> np.ndarray:
        steps = int(round(T0 / self.dt))
        return self.dt * np.arange(steps + 1)

    def require_algebra_regime(self, gamma: Nonlinearity, sigma: Nonlinearity):
        if any(g.kind in ("power", "custom") for g in (gamma, sigma)):
            if not self.zeta > self.grid.d / 2:
                raise ValueError(
                    f"genuinely nonlinear terms need zeta > d/2 (zeta={self.zeta}, d={self.grid.d})")


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray  # (len(times), *grid.shape)
    grid: Grid
    norms: np.ndarray | None = None  # ||u(t)|| in the solve norm
    distances: list = field(default_factory=list)  # Picard distance history
    diagnostics: dict = field(default_factory=dict)

    def field_at(self, i: int) -> Field:
        return Field(self.grid, self.values[i].copy())

    def sup_distance(self, other: "Trajectory", z: int, zeta: int) -> float:
        diff = self.values - other.values
        return float(h_zz_norm_batch(diff, self.grid, z, zeta).max())

    def with_norms(self, z: int, zeta: int) -> "Trajectory":
        self.norms = h_zz_norm_batch(self.values, self.grid, z, zeta)
        return self


def noise_increment_fields(cfg: SolveConfig, path: WienerPath) -> np.ndarray:
    """dXi_k = sum_j e_j dW_{j,k}, stacked (steps, *shape)."""
    e_mat = cfg.basis.e_fields_matrix().reshape(len(cfg.basis.modes), -1)
    flat = path.increments.T @ e_mat  # (steps, size)
    return flat.reshape((path.steps,) + cfg.grid.shape)


def _step(cfg: SolveConfig, vals: np.ndarray) -> np.ndarray:
    return cfg.propagator.step_values(vals, 1)


def free_trajectory(u0: Field, cfg: SolveConfig, T0: float) -> Trajectory:
    """v0(t) = S(t) u0 on the time grid."""
    times = cfg.times(T0)
    out = np.empty((len(times),) + cfg.grid.shape, dtype=complex)
    out[0] = u0.values
    for k in range(len(times) - 1):
        out[k + 1] = _step(cfg, out[k])
    return Trajectory(times, out, cfg.grid)


def apply_T(u: Trajectory, path: WienerPath, cfg: SolveConfig,
            gamma: Nonlinearity, sigma: Nonlinearity, u0: Field) -> Trajectory:
    """One application of the integral map, evaluated on the whole grid in
    a single sweep (exact semigroup accumulation)."""
    times = u.times
    steps = len(times) - 1
    if path.steps < steps:
        raise ValueError("path shorter than the trajectory time grid")
    dxi = None if sigma.is_zero else noise_increment_fields(cfg, path)
    out = np.empty_like(u.values)
    out[0] = u0.values
    v = u0.values.copy()
    acc = np.zeros_like(v)  # propagated drift + noise sums
    for k in range(steps):
        uk = Field(cfg.grid, u.values[k])
        kick = np.zeros_like(v)
        if not gamma.is_zero:
            kick += cfg.dt * gamma.nemytskii(times[k], uk).values
        if dxi is not None:
            kick += sigma.nemytskii(times[k], uk).values * dxi[k]
        acc = _step(cfg, acc + kick)
        v = _step(cfg, v)
        out[k + 1] = v - 1j * acc
    return Trajectory(times, out, cfg.grid, diagnostics=dict(u.diagnostics))


def em_solve(u0: Field, cfg: SolveConfig, gamma: Nonlinearity, sigma: Nonlinearity,
             path: WienerPath, T0: float | None = None) -> Trajectory:
    """Single-pass stepping: u_{k+1} = S(dt)[u_k - i gamma dt - i sigma dXi_k]."""
    cfg.require_algebra_regime(gamma, sigma)
    T0 = cfg.T if T0 is None else T0
    times = cfg.times(T0)
    dxi = None if sigma.is_zero else noise_increment_fields(cfg, path)
    out = np.empty((len(times),) + cfg.grid.shape, dtype=complex)
    out[0] = u0.values
    for k in range(len(times) - 1):
        uk = Field(cfg.grid, out[k])
        vals = out[k].copy()
        if not gamma.is_zero:
            vals = vals - 1j * cfg.dt * gamma.nemytskii(times[k], uk).values
        if dxi is not None:
            vals = vals - 1j * sigma.nemytskii(times[k], uk).values * dxi[k]
        out[k + 1] = _step(cfg, vals)
    return Trajectory(times, out, cfg.grid).with_norms(cfg.z, cfg.zeta)


def shrink_horizon_to_ball(u0: Field, cfg: SolveConfig, horizon: Horizon,
                           ball: LocalityBall) -> tuple[Horizon, Trajectory]:
    """Enforce ||S(t) u0 - u0|| <= R/2 on [0, T0] by shrinking T0 if needed;
    returns the (possibly shortened) horizon and the free trajectory."""
    v0 = free_trajectory(u0, cfg, horizon.T0)
    drift = h_zz_norm_batch(v0.values - u0.values[None], cfg.grid, cfg.z, cfg.zeta)
    ok = drift <= ball.radius / 2
    if bool(ok.all()):
        return horizon, v0
    last = int(np.argmax(~ok)) - 1
    if last < 1:
        raise ValueError("the free evolution leaves the locality ball within one step; "
                         "enlarge the ball radius or reduce dt")
    T0 = v0.times[last]
    new = Horizon(T0=T0, K=contraction_aggregate(T0, horizon.sup_C, horizon.C_zz, horizon.mass),
                  C_T0=float(np.exp(2 * horizon.C_zz * T0) * horizon.sup_C**2),
                  C_zz=horizon.C_zz, sup_C=horizon.sup_C, mass=horizon.mass)
    sliced = Trajectory(v0.times[: last + 1], v0.values[: last + 1], cfg.grid)
    return new, sliced


def picard_solve(u0: Field, cfg: SolveConfig, gamma: Nonlinearity, sigma: Nonlinearity,
                 path: WienerPath, T0: float | None = None,
                 initial: Trajectory | None = None,
                 ball: LocalityBall | None = None) -> Trajectory:
    """Iterate the integral map to its fixed point.

    Starts from v0 = S(.) u0 (or `initial`), stops when the sup-norm
    distance between iterates drops below picard_tol, and records the
    distance sequence plus contraction diagnostics.  Raises
    PicardDivergence when the distances grow twice in a row or the
    iteration budget runs out, BallExit when an iterate leaves the
    locality ball.
    """
    cfg.require_algebra_regime(gamma, sigma)
    T0 = cfg.T if T0 is None else T0
    ball = ball or LocalityBall(u0, max(h_zz_norm(u0, cfg.z, cfg.zeta), 1e-12))
    current = initial if initial is not None else free_trajectory(u0, cfg, T0)
    if len(current.times) != int(round(T0 / cfg.dt)) + 1:
        raise ValueError("initial trajectory does not match the time grid")
    distances: list[float] = []
    for it in range(cfg.picard_max_iters):
        nxt = apply_T(current, path, cfg, gamma, sigma, u0)
        dist = nxt.sup_distance(current, cfg.z, cfg.zeta)
        distances.append(dist)
        ball_dist = float(h_zz_norm_batch(nxt.values - u0.values[None], cfg.grid,
                                          cfg.z, cfg.zeta).max())
        if not ball.contains(ball_dist):
            raise BallExit(
                f"iterate {it + 1} left the locality ball (distance {ball_dist:g} > "
                f"radius {ball.radius:g}); the local Lipschitz certificate does not cover it")
        current = nxt
        if dist < cfg.picard_tol:
            break
        if len(distances) >= 3 and distances[-1] > distances[-2] > distances[-3]:
            raise PicardDivergence(
                f"Picard distances grew twice in a row at iteration {it + 1}", distances)
    else:
        raise PicardDivergence(
            f"no convergence to {cfg.picard_tol:g} within {cfg.picard_max_iters} iterations",
            distances)
    ratios = [distances[i + 1] / distances[i] for i in range(len(distances) - 1)
              if distances[i] > 0]
    current.distances = distances
    current.diagnostics.update(
        picard_iterations=len(distances),
        picard_ratios=ratios,
        ball_radius=ball.radius,
    )
    return current.with_norms(cfg.z, cfg.zeta)


def residual_check(u: Trajectory, path: WienerPath, cfg: SolveConfig,
                   gamma: Nonlinearity, sigma: Nonlinearity, u0: Field) -> float:
    """sup_t || u(t) - (T u)(t) ||: the integral-equation residual."""
    mapped = apply_T(u, path, cfg, gamma, sigma, u0)
    return u.sup_distance(mapped, cfg.z, cfg.zeta)
