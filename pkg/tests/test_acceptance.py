"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints a single [PASS]/[FAIL] line (visible with `pytest -s`)
and enforces the stated runtime budget.  Desk scale throughout:
d=1, n=256, L=16 unless a criterion says otherwise.
"""

import time

import numpy as np
import pytest

from schrocurve.config import resolve_config
from schrocurve.grid import Field, Grid, gaussian_field, l2_norm
from schrocurve.propagate import PropagatorConfig, evolve
from schrocurve.quantize import free_bundle
from schrocurve.runs import cmd_simulate
from schrocurve.symbols import metric_flat
from schrocurve.verify import (
    suite_contraction,
    suite_hs,
    suite_isometry,
    suite_noise,
    suite_propagator,
    suite_symbols,
)

CFG = resolve_config({})


def report(name: str, passed: bool, elapsed: float, budget: float, detail: str = ""):
    tag = "PASS" if passed else "FAIL"
    extra = f" {detail}" if detail else ""
    print(f"[{tag}] acceptance/{name} ({elapsed:.1f}s of {budget:.0f}s budget){extra}")
    assert passed, f"{name}: {detail}"
    assert elapsed < budget, f"{name} exceeded its runtime budget ({elapsed:.1f}s >= {budget}s)"


def test_free_gaussian_benchmark():
    t0 = time.perf_counter()
    grid = Grid(1, 256, 16.0)
    cfg = PropagatorConfig(grid, free_bundle(metric_flat(1)), dt=1e-3, scheme="split_step")
    u0 = gaussian_field(grid)
    out = evolve(u0, 1.0, cfg)
    x = grid.axis()
    s = 1 + 1j
    exact = np.exp(-(x**2) / (2 * s)) / np.sqrt(s)
    err = l2_norm(Field(grid, out.values - exact))
    drift = abs(l2_norm(out) - l2_norm(u0))
    elapsed = time.perf_counter() - t0
    report("free-gaussian-benchmark", err < 1e-4 and drift < 1e-8, elapsed, 10.0,
           f"l2_err={err:.2e} (tol 1e-4), drift={drift:.2e} (tol 1e-8)")


def test_growth_bound():
    t0 = time.perf_counter()
    res = suite_propagator(CFG, seed=0)
    growth = [c for c in res.checks if "/growth/" in c.name]
    assert len(growth) == 8  # flat + gauss_bump, four (z, zeta) pairs
    elapsed = time.perf_counter() - t0
    worst = max((c.value for c in growth if c.value is not None), default=float("nan"))
    report("growth-bound", all(c.passed for c in growth), elapsed, 120.0,
           f"8 cases, largest fitted C={worst:.3g}, residual tol 5%")


def test_symbol_suite():
    t0 = time.perf_counter()
    res = suite_symbols(CFG, seed=0)
    elapsed = time.perf_counter() - t0
    report("symbol-suite", res.passed, elapsed, 60.0,
           "flat/gauss_bump/rational_decay pass at declared orders; exp control fails")


def test_ito_isometry():
    t0 = time.perf_counter()
    res = suite_isometry(CFG, seed=0, n_samples=10000)
    elapsed = time.perf_counter() - t0
    rels = [c.value for c in res.checks if c.name.startswith("isometry/") and "halves" not in c.name]
    halves = next(c for c in res.checks if "halves" in c.name)
    report("ito-isometry", res.passed, elapsed, 120.0,
           f"rel_errs={[f'{v:.3f}' for v in rels]} (tol 0.05), 4x-paths ratio "
           f"{halves.value:.2f} in [0.25, 0.75]")


def test_covariance_functional():
    t0 = time.perf_counter()
    res = suite_noise(CFG, seed=0)
    cov = [c for c in res.checks if "/covariance/" in c.name]
    elapsed = time.perf_counter() - t0
    report("covariance-functional", all(c.passed for c in cov), elapsed, 60.0,
           f"{len(cov)} measure/test-field pairs at 1e4 samples, 5% rel / 3sigma band")
    assert res.passed  # the supporting noise checks must hold too


def test_hilbert_schmidt_lemma():
    t0 = time.perf_counter()
    res = suite_hs(CFG, seed=0)
    elapsed = time.perf_counter() - t0
    dominance = [c for c in res.checks if "dominance" in c.name]
    assert len(dominance) == 12  # 3 metrics x 2 noises x 2 diffusions
    trunc = next(c for c in res.checks if "truncation" in c.name)
    report("hilbert-schmidt-bound", res.passed, elapsed, 300.0,
           f"12 battery cases under kappa; J->2J change {trunc.value:.2e} (tol 1e-2)")


def test_contraction_and_fixed_point():
    t0 = time.perf_counter()
    res = suite_contraction(CFG, seed=0)
    elapsed = time.perf_counter() - t0
    ratio_checks = [c for c in res.checks if c.name.endswith("/ratios")]
    resid_checks = [c for c in res.checks if c.name.endswith("/residual")]
    guess_checks = [c for c in res.checks if c.name.endswith("/two-guesses")]
    assert len(ratio_checks) == len(resid_checks) == len(guess_checks) == 3
    core_ok = all(c.passed for c in ratio_checks + resid_checks + guess_checks)
    report("contraction-fixed-point", core_ok, elapsed, 600.0,
           "ratios <= 1.5 K(T0); residual <= 10 tol; guesses agree within 2 tol")
    assert res.passed  # monotonicity, mean-square and ladder checks included


def test_scheme_cross_check():
    t0 = time.perf_counter()
    res = suite_contraction(CFG, seed=3)
    order_checks = [c for c in res.checks if c.name.endswith("-order")]
    agree = next(c for c in res.checks if "equal-dt" in c.name)
    elapsed = time.perf_counter() - t0
    report("scheme-cross-check", all(c.passed for c in order_checks) and agree.passed,
           elapsed, 120.0,
           f"orders={[f'{c.value:.2f}' for c in order_checks]} (>= 0.9), "
           f"equal-dt gap {agree.value:.1e}")


def test_reproducibility(tmp_path):
    t0 = time.perf_counter()
    cfg = {
        "problem": {"gamma": {"kind": "power", "n": 2, "scale": 0.5},
                    "sigma": {"kind": "linear", "lam": 0.3}},
        "discretization": {"T": 0.05},
        "noise": {"type": "gaussian_density", "cutoff": 4.0, "mass": 1.0, "modes": 16},
        "monte_carlo": {"paths": 3, "seed": 4242},
        "output": {"save_every": 0.025, "save_paths": 2},
    }
    manifests = [cmd_simulate(cfg, tmp_path / f"run{i}", workers=w)
                 for i, w in enumerate((1, 1, 4))]
    shas = [sorted((f["file"], f["sha256"]) for f in m["fields"]) for m in manifests]
    elapsed = time.perf_counter() - t0
    report("reproducibility", shas[0] == shas[1] == shas[2], elapsed, 60.0,
           f"{len(shas[0])} field files bit-identical across reruns and worker counts")
