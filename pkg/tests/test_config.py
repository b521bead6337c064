import numpy as np
import pytest

from convexcip.config import DEFAULTS, ConfigError, RunConfig, parse_override


def test_defaults_build_production_setup():
    cfg = RunConfig()
    grid = cfg.grid()
    assert grid.shape == (51, 51, 21) and grid.h == pytest.approx(0.2)
    assert cfg.forward_grid().h == pytest.approx(0.1)
    assert cfg.source().position == (0.1, 0.0, -9.0)
    kg = cfg.data_kgrid()
    assert kg.Nk == 31 and kg.k_lo == 6.72 and kg.k_hi == pytest.approx(9.45)
    p = cfg.carleman()
    assert (p.lam, p.r) == (1.1, 5.5)
    inv = cfg.inverse()
    assert (inv.eps, inv.eta0, inv.eta_min) == (1e-9, 0.1, 1e-9)
    assert cfg["basis"]["N"] == 6 and cfg["geometry"]["D"] == 14.0


def test_defaults_not_mutated():
    RunConfig(overrides=["inversion.lam=2.5"])
    assert DEFAULTS["inversion"]["lam"] == 1.1


def test_override_parsing():
    assert parse_override("inversion.lam=2") == {"inversion": {"lam": 2}}
    assert parse_override("frequency.window=[7, 9]") == {"frequency": {"window": [7, 9]}}
    assert parse_override("inversion.M=null") == {"inversion": {"M": None}}
    with pytest.raises(ConfigError):
        parse_override("seed")


def test_overrides_apply_after_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("inversion:\n  lam: 3.0\nseed: 4\n")
    cfg = RunConfig.load(path, ["inversion.lam=0.5"])
    assert cfg["inversion"]["lam"] == 0.5 and cfg["seed"] == 4


@pytest.mark.parametrize("data", [
    {"inversion": {"lamda": 1.0}},
    {"geometry": 3},
    {"geometry": {"source": [0.0, 0.0, 0.0]}},
    {"geometry": {"D": 1.0}},
    {"grid": {"Nz": 20}},
    {"inversion": {"r": 1.5}},
    {"inversion": {"eta0": 2.0}},
    {"preprocess": {"fraction": 1.2}},
    {"basis": {"N": 0}},
    {"frequency": {"auto": True}},
    {"medium": {"shapes": [{"type": "box", "center": [0, 0, 1.9], "size": [1, 1, 1], "c": 2}]}},
    {"medium": {"shapes": [{"type": "blob", "c": 2}]}},
    {"simulate": {"far_half_width": 1.0}},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        RunConfig(data)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "none.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("inversion: [unclosed\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)


def test_auto_window_samples_the_band():
    cfg = RunConfig({"frequency": {"auto": True, "band": [2.09, 20.95], "samples": 301}})
    kg = cfg.data_kgrid()
    assert kg.Nk == 301 and np.allclose(np.diff(kg.nodes), (20.95 - 2.09) / 300)


def test_snapshot_is_a_copy():
    cfg = RunConfig()
    snap = cfg.snapshot()
    snap["seed"] = 99
    assert cfg["seed"] == 0
