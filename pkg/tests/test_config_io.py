import json

import numpy as np
import pytest

from bathsim import io
from bathsim.config import PRESETS, ConfigError, ExperimentConfig, load_preset, resolve_config
from bathsim.spectrum import Family


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load(name):
    cfg = load_preset(name)
    assert cfg.name == name
    spec = cfg.bath_spectrum()
    assert spec.nu0 == cfg.spectrum.nu0
    cfg.oscillator_model()


def test_preset_families():
    assert load_preset("case-a-decay").bath_spectrum().family is Family.GAUSSIAN_GAP
    assert load_preset("kg-demo").bath_spectrum().family is Family.KLEIN_GORDON
    assert load_preset("case-b-doublewell").oscillator_model().is_linear is False


def test_hash_stable_and_sensitive():
    a, b = load_preset("case-a-sync"), load_preset("case-a-sync")
    assert a.hash == b.hash
    assert a.replace(**{"integration.dt": 2e-3}).hash != a.hash


def test_env_seed():
    cfg = load_preset("kg-demo")
    assert cfg.with_env_seed({}).initial.seed == 7
    assert cfg.with_env_seed({"BATHSIM_SEED": "42"}).initial.seed == 42
    with pytest.raises(ConfigError):
        cfg.with_env_seed({"BATHSIM_SEED": "x"})


@pytest.mark.parametrize("patch", [
    {"integration": {"dt": 0.0}},
    {"integration": {"T": -1.0}},
    {"integration": {"engine": "rk4"}},
    {"initial": {"bath": "hot"}},
    {"spectrum": {"family": "tabulated", "table": "missing.csv"}},
    {"integration": {"bogus": 1}},
    {"flavour": 1},
    {"analysis": {"window_length": 1}},
])
def test_invalid(patch, tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(patch, base_dir=tmp_path)


def test_tabulated_relative_path(tmp_path):
    (tmp_path / "t.csv").write_text("nu,a_hat\n0,0\n1,0.5\n9,0.0\n")
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"spectrum": {"family": "tabulated", "table": "t.csv"}}))
    cfg = resolve_config(str(p))
    assert cfg.bath_spectrum().family is Family.TABULATED


def test_resolve_unknown():
    with pytest.raises(ConfigError):
        resolve_config("no-such-preset")


def test_csv_roundtrip(tmp_path):
    x = np.array([[1 / 3, np.pi], [np.exp(1), -1e-300]])
    p = io.write_csv(tmp_path / "a.csv", "kernel", x, "abc123")
    meta, cols, data = io.read_csv(p)
    assert meta == {"schema": "kernel", "version": "1", "config_hash": "abc123"}
    assert cols == ["tau", "w"]
    np.testing.assert_array_equal(data, x)


def test_csv_row_length(tmp_path):
    with pytest.raises(ValueError):
        io.write_csv(tmp_path / "a.csv", "kernel", [(1.0,)], "h")


def test_json_sidecar(tmp_path):
    p = io.write_json(tmp_path / "a.json", {"v": np.float64(0.1), "z": 1 + 2j, "n": float("nan")}, "h", "test")
    doc = json.loads(p.read_text())
    assert doc["config_hash"] == "h" and doc["version"] == 1
    assert doc["v"] == 0.1 and doc["z"] == {"re": 1.0, "im": 2.0} and doc["n"] == "nan"
