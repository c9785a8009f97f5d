"""Run configuration: TOML (primary) or JSON, schema-validated, with every
field defaulted.  Resolution is idempotent and the resolved form is echoed
verbatim into run manifests."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:
    import tomli as tomllib

from .grid import Field, Grid, gaussian_field, zero_field
from .noise import (
    SpectralMeasure,
    spectral_atoms,
    spectral_gaussian_density,
    spectral_uniform_density,
)
from .propagate import PropagatorConfig
from .quantize import GeneratorBundle
from .solve import Nonlinearity, SolveConfig, nonlinearity_from_config
from .symbols import (
    MAGNETIC_FAMILIES,
    METRIC_FAMILIES,
    POTENTIAL_FAMILIES,
    build_hamiltonian,
    build_lower_metric_term,
    check_ellipticity,
)


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"config field '{path}': {msg}")
        self.field_path = path


DEFAULTS = {
    "problem": {
        "metric": "flat",
        "metric_eps": 0.5,
        "potential": "none",
        "potential_amp": 1.0,
        "potential_width": 2.0,
        "magnetic": "none",
        "magnetic_amp": 0.3,
        "u0": "gaussian",
        "u0_width": 1.0,
        "u0_center": 0.0,
        "u0_amp": 1.0,
        "gamma": {"kind": "zero", "lam": 1.0, "n": 2, "scale": 1.0, "value": 1.0},
        "sigma": {"kind": "zero", "lam": 1.0, "n": 2, "scale": 1.0, "value": 1.0},
    },
    "discretization": {
        "d": 1,
        "n": 256,
        "L": 16.0,
        "dt": 1e-3,
        "T": 0.1,
        "scheme": "auto",
        "substeps": "reject",
    },
    "noise": {
        "type": "atoms",
        "atoms": [],
        "width": 1.0,
        "cutoff": 8.0,
        "mass": -1.0,  # < 0 means: keep the family's natural mass
        "modes": 64,
    },
    "solver": {
        "z": 0,
        "zeta": 1,
        "picard_tol": 1e-6,
        "picard_max_iters": 50,
        "method": "picard",
    },
    "monte_carlo": {"paths": 1, "seed": 12345},
    "output": {"dir": "runs/out", "save_every": 0.01, "save_times": [], "save_paths": 1},
}

_CHOICES = {
    "problem.metric": set(METRIC_FAMILIES),
    "problem.potential": set(POTENTIAL_FAMILIES),
    "problem.magnetic": set(MAGNETIC_FAMILIES),
    "problem.u0": {"gaussian", "packet", "zero"},
    "noise.type": {"atoms", "gaussian_density", "uniform_density"},
    "solver.method": {"picard", "em"},
    "discretization.scheme": {"auto", "split_step", "rk4"},
    "discretization.substeps": {"reject", "auto"},
}

DESK_2D = {"n": 128, "L": 12.0}


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if path.suffix == ".json":
        raw = json.loads(path.read_text())
    else:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    return resolve_config(raw)


def resolve_config(raw: dict) -> dict:
    """Fill defaults and validate; resolving a resolved config is the identity."""
    cfg = copy.deepcopy(DEFAULTS)
    explicit_n = "discretization" in raw and "n" in raw.get("discretization", {})
    explicit_L = "discretization" in raw and "L" in raw.get("discretization", {})
    for section, payload in raw.items():
        if section not in cfg:
            raise ConfigError(section, "unknown section")
        if not isinstance(payload, dict):
            raise ConfigError(section, "must be a table/object")
        for key, val in payload.items():
            if key not in cfg[section]:
                raise ConfigError(f"{section}.{key}", "unknown field")
            if isinstance(cfg[section][key], dict):
                if not isinstance(val, dict):
                    raise ConfigError(f"{section}.{key}", "must be a table/object")
                merged = dict(cfg[section][key])
                for k2, v2 in val.items():
                    if k2 not in merged:
                        raise ConfigError(f"{section}.{key}.{k2}", "unknown field")
                    merged[k2] = v2
                cfg[section][key] = merged
            else:
                cfg[section][key] = val
    d = cfg["discretization"]["d"]
    if d == 2:  # desk-scale 2-d defaults unless the user pinned them
        if not explicit_n:
            cfg["discretization"]["n"] = DESK_2D["n"]
        if not explicit_L:
            cfg["discretization"]["L"] = DESK_2D["L"]
    _validate(cfg)
    return cfg


def _validate(cfg: dict):
    for dotted, allowed in _CHOICES.items():
        sec, key = dotted.split(".")
        if cfg[sec][key] not in allowed:
            raise ConfigError(dotted, f"must be one of {sorted(allowed)}")
    dd = cfg["discretization"]
    if dd["d"] not in (1, 2):
        raise ConfigError("discretization.d", "must be 1 or 2")
    n = dd["n"]
    if n < 8 or (n & (n - 1)) != 0:
        raise ConfigError("discretization.n", "must be a power of two >= 8")
    for key in ("L", "dt", "T"):
        if not dd[key] > 0:
            raise ConfigError(f"discretization.{key}", "must be positive")
    sv = cfg["solver"]
    if sv["z"] < 0 or sv["zeta"] < 0:
        raise ConfigError("solver.z", "z and zeta must be nonnegative")
    if not sv["picard_tol"] > 0:
        raise ConfigError("solver.picard_tol", "must be positive")
    mc = cfg["monte_carlo"]
    if mc["paths"] < 1:
        raise ConfigError("monte_carlo.paths", "must be >= 1")
    if cfg["noise"]["type"] == "atoms":
        for pair in cfg["noise"]["atoms"]:
            if len(pair) != 2:
                raise ConfigError("noise.atoms", "entries must be [xi, weight] pairs")


# -- builders -----------------------------------------------------------------

def build_grid(cfg: dict) -> Grid:
    dd = cfg["discretization"]
    return Grid(dd["d"], dd["n"], float(dd["L"]))


def build_bundle(cfg: dict) -> GeneratorBundle:
    p = cfg["problem"]
    d = cfg["discretization"]["d"]
    metric = METRIC_FAMILIES[p["metric"]](d) if p["metric"] == "flat" else \
        METRIC_FAMILIES[p["metric"]](d, eps=float(p["metric_eps"]))
    pot = POTENTIAL_FAMILIES[p["potential"]](
        d, **({"amp": float(p["potential_amp"]), "width": float(p["potential_width"])}
              if p["potential"] != "none" else {}))
    mag = MAGNETIC_FAMILIES[p["magnetic"]](
        d, **({"amp": float(p["magnetic_amp"])} if p["magnetic"] != "none" else {}))
    return GeneratorBundle(build_hamiltonian(metric), build_lower_metric_term(metric), mag, pot)


def build_metric(cfg: dict):
    p = cfg["problem"]
    d = cfg["discretization"]["d"]
    if p["metric"] == "flat":
        return METRIC_FAMILIES["flat"](d)
    return METRIC_FAMILIES[p["metric"]](d, eps=float(p["metric_eps"]))


def build_u0(cfg: dict, grid: Grid) -> Field:
    p = cfg["problem"]
    if p["u0"] == "zero":
        return zero_field(grid)
    f = gaussian_field(grid, width=float(p["u0_width"]), center=p["u0_center"],
                       amp=float(p["u0_amp"]))
    if p["u0"] == "packet":
        k0 = 2.0 * grid.freq_spacing  # gentle carrier so the packet moves
        phase = sum(np.asarray(ax) for ax in grid.points()[:1])
        f = Field(grid, f.values * np.exp(1j * k0 * phase))
    return f


def build_measure(cfg: dict, grid: Grid) -> SpectralMeasure:
    nz = cfg["noise"]
    mass = None if nz["mass"] < 0 else float(nz["mass"])
    if nz["type"] == "atoms":
        m = spectral_atoms(grid, [(xi, w) for xi, w in nz["atoms"]])
        if mass is not None and m.total_mass() > 0:
            m = SpectralMeasure(grid, m.weights_fft * (mass / m.total_mass()), kind="atoms")
        return m
    if nz["type"] == "gaussian_density":
        return spectral_gaussian_density(grid, width=float(nz["width"]),
                                         cutoff=float(nz["cutoff"]), mass=mass)
    return spectral_uniform_density(grid, cutoff=float(nz["cutoff"]), mass=mass)


def build_nonlinearities(cfg: dict) -> tuple[Nonlinearity, Nonlinearity]:
    return (nonlinearity_from_config(cfg["problem"]["gamma"]),
            nonlinearity_from_config(cfg["problem"]["sigma"]))


def build_solve_config(cfg: dict, seed: int | None = None) -> SolveConfig:
    grid = build_grid(cfg)
    bundle = build_bundle(cfg)
    dd = cfg["discretization"]
    ell = check_ellipticity(build_metric(cfg))
    prop = PropagatorConfig(grid, bundle, float(dd["dt"]), scheme=dd["scheme"],
                            substeps=dd["substeps"], ellipticity=ell)
    measure = build_measure(cfg, grid)
    sv = cfg["solver"]
    return SolveConfig(
        grid, prop, measure, z=int(sv["z"]), zeta=int(sv["zeta"]),
        dt=float(dd["dt"]), T=float(dd["T"]), n_modes=int(cfg["noise"]["modes"]),
        picard_tol=float(sv["picard_tol"]), picard_max_iters=int(sv["picard_max_iters"]),
        seed=int(cfg["monte_carlo"]["seed"] if seed is None else seed),
    )
