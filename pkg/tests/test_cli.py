"""CLI and run-layer tests: config resolution, manifests, reproducibility."""

import json
from pathlib import Path

import numpy as np
import pytest

from schrocurve.cli import main
from schrocurve.config import ConfigError, load_config, resolve_config
from schrocurve.grid import load_field
from schrocurve.runs import cmd_info, cmd_noise_sample, cmd_simulate, cmd_verify

BATTERY = {
    "problem": {
        "gamma": {"kind": "power", "n": 2, "scale": 0.5},
        "sigma": {"kind": "linear", "lam": 0.3},
    },
    "discretization": {"T": 0.05},
    "noise": {"type": "gaussian_density", "cutoff": 4.0, "mass": 1.0, "modes": 16},
    "monte_carlo": {"paths": 2, "seed": 99},
    "output": {"save_every": 0.05},
}


def test_resolve_config_defaults_and_idempotence():
    cfg = resolve_config({})
    assert cfg["discretization"]["n"] == 256
    assert cfg["solver"]["zeta"] == 1
    assert resolve_config(cfg) == cfg


def test_resolve_config_2d_desk_defaults():
    cfg = resolve_config({"discretization": {"d": 2}})
    assert cfg["discretization"]["n"] == 128
    assert cfg["discretization"]["L"] == 12.0
    pinned = resolve_config({"discretization": {"d": 2, "n": 64}})
    assert pinned["discretization"]["n"] == 64


def test_resolve_config_unknown_field_path():
    with pytest.raises(ConfigError) as err:
        resolve_config({"problem": {"metrc": "flat"}})
    assert err.value.field_path == "problem.metrc"
    with pytest.raises(ConfigError, match="power of two"):
        resolve_config({"discretization": {"n": 100}})


def test_load_config_toml_and_json(tmp_path):
    toml_path = tmp_path / "a.toml"
    toml_path.write_text('[discretization]\nT = 0.25\n')
    assert load_config(toml_path)["discretization"]["T"] == 0.25
    json_path = tmp_path / "a.json"
    json_path.write_text(json.dumps({"discretization": {"T": 0.5}}))
    assert load_config(json_path)["discretization"]["T"] == 0.5


def test_simulate_manifest_closure(tmp_path):
    man = cmd_simulate(BATTERY, tmp_path / "run")
    root = tmp_path / "run"
    assert (root / "manifest.json").exists()
    stored = json.loads((root / "manifest.json").read_text())
    import hashlib
    for entry in stored["fields"] + stored["tables"]:
        p = root / entry["file"]
        assert p.exists()
        assert hashlib.sha256(p.read_bytes()).hexdigest() == entry["sha256"]
    assert stored["verdicts"]["picard-converged"]
    assert man["horizon"]["K"] < 1
    # saved fields load and match the grid
    f = load_field(root / stored["fields"][0]["file"])
    assert f.grid.n == 256


def test_simulate_reproducible_across_workers(tmp_path):
    m1 = cmd_simulate(BATTERY, tmp_path / "a", workers=1)
    m2 = cmd_simulate(BATTERY, tmp_path / "b", workers=3)
    sha1 = sorted(f["sha256"] for f in m1["fields"])
    sha2 = sorted(f["sha256"] for f in m2["fields"])
    assert sha1 == sha2


def test_simulate_seed_changes_output(tmp_path):
    m1 = cmd_simulate(BATTERY, tmp_path / "a", seed=1)
    m2 = cmd_simulate(BATTERY, tmp_path / "b", seed=2)
    assert sorted(f["sha256"] for f in m1["fields"]) != sorted(f["sha256"] for f in m2["fields"])


def test_zero_noise_zero_drift_reduces_to_free_evolution(tmp_path):
    cfg = {"discretization": {"T": 0.05}, "noise": {"atoms": [[0.0, 1.0]]},
           "output": {"save_every": 0.05}}
    man = cmd_simulate(cfg, tmp_path / "free")
    norms = np.asarray(man["norms"]["values"])
    assert abs(norms[-1] - norms[0]) < 1e-8  # unitary free flow
    assert man["picard"]["iterations"] == 1


def test_info_matches_simulate(tmp_path):
    info = cmd_info(BATTERY)
    man = cmd_simulate(BATTERY, tmp_path / "run")
    assert info["horizon"]["T0"] == pytest.approx(man["horizon"]["T0"])
    assert info["horizon"]["K"] == pytest.approx(man["horizon"]["K"])
    assert info["mass"] == pytest.approx(1.0)


def test_info_mass_monotonicity():
    heavier = json.loads(json.dumps(BATTERY))
    heavier["noise"]["mass"] = 4.0
    heavier["discretization"]["T"] = 2.0
    lighter = json.loads(json.dumps(BATTERY))
    lighter["noise"]["mass"] = 1.0
    lighter["discretization"]["T"] = 2.0
    hi = cmd_info(heavier)
    lo = cmd_info(lighter)
    assert hi["horizon"]["T0"] < lo["horizon"]["T0"]


def test_noise_sample_manifest(tmp_path):
    cfg = {"noise": {"type": "atoms", "atoms": [[np.pi / 16 * 4, 0.5], [-np.pi / 16 * 4, 0.5]]}}
    man = cmd_noise_sample(cfg, tmp_path / "noise", n_samples=16384)
    assert man["verdicts"]["covariance-profile"]
    assert man["measure"]["n_atoms"] == 2
    # fixed seed -> reproducible dump
    man2 = cmd_noise_sample(cfg, tmp_path / "noise2", n_samples=16384)
    assert [f["sha256"] for f in man["fields"]] == [f["sha256"] for f in man2["fields"]]


def test_noise_sample_zero_mass(tmp_path):
    cfg = {"noise": {"type": "atoms", "atoms": []}}
    man = cmd_noise_sample(cfg, tmp_path / "noise")
    f = load_field(Path(tmp_path / "noise") / man["fields"][0]["file"])
    assert np.all(f.values == 0)


def test_verify_cmd_exit_semantics(tmp_path):
    man = cmd_verify("norms", {}, out_dir=tmp_path / "ver")
    assert man["all_passed"]
    assert (tmp_path / "ver" / "manifest.json").exists()


def test_cli_main_info_and_verify(tmp_path, capsys):
    cfgfile = tmp_path / "c.toml"
    cfgfile.write_text("[discretization]\nT = 0.01\n")
    assert main(["info", "--config", str(cfgfile)]) == 0
    capsys.readouterr()
    assert main(["verify", "norms"]) == 0
    out = capsys.readouterr().out
    assert "suite norms: PASS" in out


def test_cli_main_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[discretization]\nn = 100\n")
    assert main(["info", "--config", str(bad)]) == 2
    assert "power of two" in capsys.readouterr().err


def test_cli_simulate_exit_zero(tmp_path):
    cfgfile = tmp_path / "c.toml"
    cfgfile.write_text('[discretization]\nT = 0.02\n[output]\ndir = "%s"\n' % (tmp_path / "out"))
    assert main(["simulate", "--config", str(cfgfile)]) == 0
