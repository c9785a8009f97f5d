"""Run orchestration: simulate / verify / noise-sample / info.

Every run writes a self-contained directory: `manifest.json` plus
`fields/*.bin` (with JSON sidecars) and `tables/*.csv`.  The manifest
echoes the resolved config and the seed, and lists every produced file
with its sha256, so a rerun from the manifest reproduces the outputs
bit-exactly and downstream tooling never has to touch internals.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    build_nonlinearities,
    build_solve_config,
    build_u0,
    resolve_config,
)
from .grid import BOUNDARY_FLAG_THRESHOLD, Field, boundary_mass, h_zz_norm, save_field
from .noise import NoiseSynthesizer, correlation_from_spectral, field_stream
from .propagate import fit_growth
from .solve import (
    LocalityBall,
    ball_probes,
    em_solve,
    free_trajectory,
    lip_constants,
    pick_horizon,
    picard_solve,
    shrink_horizon_to_ball,
)
from .stochastic import sample_path, zero_path
from .verify import run_suites

MANIFEST_SCHEMA = "schrocurve-run-v1"


def default_workers(requested: int | None) -> int:
    if requested is not None and requested > 0:
        return requested
    env = os.environ.get("SCHROCURVE_WORKERS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class RunWriter:
    def __init__(self, out_dir: str | Path):
        self.root = Path(out_dir)
        (self.root / "fields").mkdir(parents=True, exist_ok=True)
        (self.root / "tables").mkdir(parents=True, exist_ok=True)
        self.fields: list[dict] = []
        self.tables: list[dict] = []

    def add_field(self, f: Field, name: str, **extra) -> dict:
        rel = f"fields/{name}.bin"
        side = save_field(f, self.root / rel)
        entry = {"file": rel, "sha256": side["sha256"], **extra}
        self.fields.append(entry)
        return entry

    def add_table(self, name: str, csv_text: str) -> dict:
        rel = f"tables/{name}.csv"
        path = self.root / rel
        path.write_text(csv_text)
        entry = {"name": name, "file": rel, "sha256": _sha256(path)}
        self.tables.append(entry)
        return entry

    def write_manifest(self, payload: dict) -> dict:
        payload = dict(payload)
        payload.setdefault("schema", MANIFEST_SCHEMA)
        payload.setdefault("code_version", __version__)
        payload["fields"] = self.fields
        payload["tables"] = self.tables
        path = self.root / "manifest.json"
        path.write_text(json.dumps(payload, indent=1, sort_keys=True))
        return payload


def _prepare_problem(cfg: dict, seed: int):
    scfg = build_solve_config(cfg, seed=seed)
    gamma, sigma = build_nonlinearities(cfg)
    u0 = build_u0(cfg, scfg.grid)
    norm0 = h_zz_norm(u0, scfg.z, scfg.zeta)
    ball = LocalityBall(u0, max(norm0, 1e-12))
    if gamma.is_zero and sigma.is_zero:
        sup_C = 0.0
    else:
        probes = ball_probes(ball, 8, scfg.z, scfg.zeta, seed=seed)
        sup_C = max(lip_constants(gamma, ball, probes, scfg.z, scfg.zeta).sup,
                    lip_constants(sigma, ball, probes, scfg.z, scfg.zeta).sup)
    # short growth fit for the propagator constant
    if norm0 > 0:
        v_probe = free_trajectory(u0, scfg, min(scfg.T, 16 * scfg.dt))
        from .grid import h_zz_norm_batch
        norms = h_zz_norm_batch(v_probe.values, scfg.grid, scfg.z, scfg.zeta)
        C_zz = fit_growth(v_probe.times, norms, scfg.z, scfg.zeta).fitted_C
    else:
        C_zz = 0.0
    horizon = pick_horizon(scfg.T, scfg.dt, sup_C, C_zz, scfg.measure.total_mass())
    if norm0 > 0 and not (gamma.is_zero and sigma.is_zero):
        horizon, v0 = shrink_horizon_to_ball(u0, scfg, horizon, ball)
    else:
        v0 = free_trajectory(u0, scfg, horizon.T0)
    return scfg, gamma, sigma, u0, ball, horizon, v0


def cmd_simulate(cfg: dict, out_dir: str | Path, seed: int | None = None,
                 workers: int | None = None) -> dict:
    cfg = resolve_config(cfg)
    seed = int(cfg["monte_carlo"]["seed"] if seed is None else seed)
    nworkers = default_workers(workers)
    t_start = time.perf_counter()
    scfg, gamma, sigma, u0, ball, horizon, v0 = _prepare_problem(cfg, seed)
    steps = int(round(horizon.T0 / scfg.dt))
    times = scfg.times(horizon.T0)
    n_paths = int(cfg["monte_carlo"]["paths"])
    method = cfg["solver"]["method"]
    n_modes = len(scfg.basis.modes)
    scfg.propagator.step_values(u0.values, 1)  # warm the step cache before threading

    def solve_one(p: int):
        path = (zero_path(n_modes, scfg.dt, steps) if sigma.is_zero
                else sample_path(n_modes, scfg.dt, steps, seed=seed, sample_index=p))
        if method == "em":
            traj = em_solve(u0, scfg, gamma, sigma, path, T0=horizon.T0)
        else:
            traj = picard_solve(u0, scfg, gamma, sigma, path, T0=horizon.T0,
                                initial=v0, ball=ball)
            traj.with_norms(scfg.z, scfg.zeta)
        return p, traj

    results = {}
    if n_paths == 1 or nworkers == 1:
        for p in range(n_paths):
            idx, traj = solve_one(p)
            results[idx] = traj
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            for idx, traj in pool.map(solve_one, range(n_paths)):
                results[idx] = traj
    t_solve = time.perf_counter() - t_start

    writer = RunWriter(out_dir)
    save_times = _resolve_save_times(cfg, times)
    save_paths = min(int(cfg["output"]["save_paths"]), n_paths)
    saved_times = []
    for p in range(save_paths):
        traj = results[p]
        for ti in save_times:
            idx = int(round(ti / scfg.dt))
            name = f"p{p:04d}_t{idx:06d}"
            writer.add_field(traj.field_at(idx), name, time=float(times[idx]), path_index=p)
            if p == 0:
                saved_times.append(float(times[idx]))

    traj0 = results[0]
    growth = fit_growth(times, traj0.norms, scfg.z, scfg.zeta)
    writer.add_table("norms", "t,h_norm\n" + "\n".join(
        f"{t:.9g},{v:.12e}" for t, v in zip(times, traj0.norms)))
    if traj0.distances:
        writer.add_table("picard", "iteration,distance\n" + "\n".join(
            f"{i + 1},{d:.12e}" for i, d in enumerate(traj0.distances)))
    summary_rows = ["path,iterations,sup_norm,terminal_norm,boundary_flagged"]
    boundary_ok = True
    for p in sorted(results):
        traj = results[p]
        bm = boundary_mass(traj.field_at(len(times) - 1))
        flagged = bm > BOUNDARY_FLAG_THRESHOLD
        boundary_ok = boundary_ok and not flagged
        summary_rows.append(
            f"{p},{traj.diagnostics.get('picard_iterations', 0)},"
            f"{float(traj.norms.max()):.12e},{float(traj.norms[-1]):.12e},{int(flagged)}")
    writer.add_table("summary", "\n".join(summary_rows) + "\n")

    verdicts = {
        "horizon-found": True,
        "picard-converged": all("picard_iterations" not in r.diagnostics
                                or r.distances[-1] < scfg.picard_tol for r in results.values()),
        "boundary-ok": boundary_ok,
    }
    manifest = {
        "kind": "simulate",
        "config": cfg,
        "seed": seed,
        "workers": nworkers,
        "grid": {"d": scfg.grid.d, "n": scfg.grid.n, "L": scfg.grid.half_width},
        "times": saved_times,
        "horizon": {
            "T0": horizon.T0, "K": horizon.K, "C_T0": horizon.C_T0,
            "C_zz": horizon.C_zz, "sup_C": horizon.sup_C, "mass": horizon.mass,
            "formula": horizon.formula,
        },
        "norms": {"times": [float(t) for t in times],
                  "values": [float(v) for v in traj0.norms]},
        "growth": {"fitted_C": growth.fitted_C, "lsq_C": growth.lsq_C,
                   "residual_rel": growth.residual_rel},
        "picard": {
            "distances": [float(d) for d in traj0.distances],
            "iterations": traj0.diagnostics.get("picard_iterations", 0),
            "K": horizon.K,
            "ratio_bound": 1.5 * horizon.K,
            "tolerance": scfg.picard_tol,
        },
        "verdicts": verdicts,
        "timings": {"solve_s": t_solve, "total_s": time.perf_counter() - t_start},
    }
    return writer.write_manifest(manifest)


def _resolve_save_times(cfg: dict, times: np.ndarray) -> list[float]:
    out = cfg["output"]
    if out["save_times"]:
        return [float(t) for t in out["save_times"] if t <= times[-1] + 1e-12]
    every = float(out["save_every"])
    if every <= 0:
        return [float(times[-1])]
    picks = []
    t = 0.0
    while t <= times[-1] + 1e-12:
        picks.append(min(float(t), float(times[-1])))
        t += every
    if picks[-1] != float(times[-1]):
        picks.append(float(times[-1]))
    return picks


def cmd_verify(suites, cfg: dict, out_dir: str | Path | None = None, seed: int = 0) -> dict:
    cfg = resolve_config(cfg)
    results = run_suites(suites, cfg, seed=seed)
    manifest = {
        "kind": "verify",
        "config": cfg,
        "seed": seed,
        "suites": {r.suite: {"passed": r.passed, "elapsed_s": r.elapsed,
                             "checks": r.verdicts()} for r in results},
        "verdicts": {f"{r.suite}": r.passed for r in results},
        "all_passed": all(r.passed for r in results),
    }
    if out_dir is not None:
        writer = RunWriter(out_dir)
        for r in results:
            for name, csv_text in r.tables.items():
                writer.add_table(f"{r.suite}_{name}", csv_text)
        manifest = writer.write_manifest(manifest)
    return manifest


def cmd_noise_sample(cfg: dict, out_dir: str | Path, seed: int | None = None,
                     n_samples: int = 16384, n_dump: int = 4) -> dict:
    cfg = resolve_config(cfg)
    seed = int(cfg["monte_carlo"]["seed"] if seed is None else seed)
    scfg = build_solve_config(cfg, seed=seed)
    measure = scfg.measure
    grid = scfg.grid
    dt = scfg.dt
    synth = NoiseSynthesizer(measure)
    draws = synth.sample(dt, n_samples, field_stream(seed, 0))

    writer = RunWriter(out_dir)
    for i in range(min(n_dump, n_samples)):
        writer.add_field(Field(grid, draws[i].astype(complex)), f"noise_{i:04d}",
                         sample_index=i)

    corr = correlation_from_spectral(measure)
    mid = grid.n // 2
    center = (mid,) * grid.d
    emp = (draws.reshape(n_samples, -1) * draws[(slice(None),) + center][:, None]).mean(axis=0) / dt
    ana = ((2 * np.pi) ** grid.d) * corr.values.ravel()
    scale = max(float(np.abs(ana).max()), 1e-300)
    rel = float(np.abs(emp - ana).max() / scale)
    passed = rel < 0.05 or measure.total_mass() == 0.0
    rows = ["index,empirical,analytic"]
    rows += [f"{i},{e:.9e},{a:.9e}" for i, (e, a) in enumerate(zip(emp, ana))]
    writer.add_table("covariance_profile", "\n".join(rows) + "\n")
    manifest = {
        "kind": "noise-sample",
        "config": cfg,
        "seed": seed,
        "grid": {"d": grid.d, "n": grid.n, "L": grid.half_width},
        "measure": measure.describe(),
        "n_samples": n_samples,
        "verdicts": {"covariance-profile": bool(passed)},
        "covariance_max_rel_dev": rel,
    }
    return writer.write_manifest(manifest)


def cmd_info(cfg: dict, seed: int | None = None) -> dict:
    cfg = resolve_config(cfg)
    seed = int(cfg["monte_carlo"]["seed"] if seed is None else seed)
    scfg, gamma, sigma, u0, ball, horizon, _v0 = _prepare_problem(cfg, seed)
    steps = int(round(horizon.T0 / scfg.dt))
    field_bytes = 16 * scfg.grid.n**scfg.grid.d
    info = {
        "kind": "info",
        "config": cfg,
        "seed": seed,
        "grid": {"d": scfg.grid.d, "n": scfg.grid.n, "L": scfg.grid.half_width,
                 "spacing": scfg.grid.spacing},
        "noise": scfg.measure.describe(),
        "mass": scfg.measure.total_mass(),
        "modes": len(scfg.basis.modes),
        "horizon": {"T0": horizon.T0, "K": horizon.K, "formula": horizon.formula,
                    "sup_C": horizon.sup_C, "C_zz": horizon.C_zz},
        "steps": steps,
        "estimated_bytes_per_trajectory": field_bytes * (steps + 1),
        "gamma": gamma.describe(),
        "sigma": sigma.describe(),
    }
    return info
