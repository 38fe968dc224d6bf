import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from upsf.core import (
    ConfigError,
    Grid,
    PatchKind,
    RealPatch,
    SimConfig,
    config_to_text,
    default_config,
    grid_from_config,
    parse_config_text,
    load_config,
    wavelength,
)


def test_wavelength_values():
    assert wavelength(1540, 5e6) == pytest.approx(3.08e-4, rel=1e-12)
    assert wavelength(1540, 3e6) == pytest.approx(5.1333e-4, rel=1e-4)
    assert wavelength(1540, 7.5e6) == pytest.approx(2.0533e-4, rel=1e-4)


@pytest.mark.parametrize("c,fc", [(0, 5e6), (-1540, 5e6), (1540, 0), (1540, -1e6)])
def test_wavelength_rejects_nonpositive(c, fc):
    with pytest.raises(ValueError):
        wavelength(c, fc)


def test_grid_from_config_spacings():
    cfg = default_config()  # fc = 5 MHz
    g = grid_from_config(cfg, 256, 256)
    assert g.dx == pytest.approx(9.625e-6, rel=1e-12)
    assert g.dz == pytest.approx(1.925e-5, rel=1e-12)

    g64 = grid_from_config(cfg, 64, 64)
    assert g64.dx == g.dx and g64.dz == g.dz
    assert g64.shape == (64, 64)

    g3 = grid_from_config(replace(cfg, fc=3e6), 256, 256)
    assert g3.dx == pytest.approx(1540 / 3e6 / 32, rel=1e-12)
    assert g3.dx == pytest.approx(1.6042e-5, rel=1e-4)


def test_grid_centered_on_target():
    cfg = default_config()
    for nx, nz in [(64, 64), (256, 128), (33, 47)]:
        g = grid_from_config(cfg, nx, nz)
        x, z = g.physical(*g.center_index)
        assert x == pytest.approx(0.0, abs=1e-15)
        assert z == pytest.approx(cfg.depth, rel=1e-12)


def test_grid_roundtrip_identity():
    g = grid_from_config(default_config(), 48, 80)
    for iz in range(g.nz):
        for ix in range(0, g.nx, 7):
            x, z = g.physical(iz, ix)
            assert g.index(x, z) == (iz, ix)


_BAD_FIELDS = [
    ({"n_elements": 1}, "n_elements.range"),
    ({"pitch": 0.0}, "pitch.range"),
    ({"fc": -5e6}, "fc.range"),
    ({"fractional_bandwidth": 0.0}, "fractional_bandwidth.range"),
    ({"fractional_bandwidth": 1.0}, "fractional_bandwidth.range"),
    ({"c": -1.0}, "c.range"),
    ({"f_number": 0.0}, "f_number.range"),
    ({"depth": 0.0}, "depth.range"),
    ({"max_phase_error": -0.1}, "max_phase_error.range"),
    ({"corr_length": 0.0}, "corr_length.range"),
    ({"dynamic_range": 0.0}, "dynamic_range.range"),
]


@pytest.mark.parametrize("overrides,code", _BAD_FIELDS)
def test_config_rejects_each_field_with_distinct_code(overrides, code):
    with pytest.raises(ConfigError) as err:
        SimConfig(**overrides)
    assert err.value.code == code


def test_config_accepts_all_corner_values_quietly():
    corners = dict(
        n_elements=128,
        pitch=0.3e-3,
        c=1540.0,
        f_number=2.0,
        corr_length=5e-3,
        dynamic_range=60.0,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for fc in (3e6, 7.5e6):
            for fbw in (0.3, 0.8):
                for depth in (10e-3, 40e-3):
                    for mpe in (0.0, math.pi / 2):
                        SimConfig(fc=fc, fractional_bandwidth=fbw, depth=depth,
                                  max_phase_error=mpe, **corners)


def test_config_warns_outside_quiet_ranges():
    with pytest.warns(UserWarning):
        SimConfig(fc=10e6)
    with pytest.warns(UserWarning):
        SimConfig(max_phase_error=2.0)


def test_config_text_roundtrip():
    cfg = SimConfig(fc=3e6, depth=17e-3, fractional_bandwidth=0.42)
    parsed = parse_config_text(config_to_text(cfg))
    assert parsed == cfg


def test_config_defaults_documented_midpoints():
    cfg = default_config()
    assert cfg.fc == 5e6
    assert cfg.fractional_bandwidth == 0.6
    assert cfg.depth == pytest.approx(25e-3)


def test_config_parse_units_and_errors():
    cfg = parse_config_text("fc_mhz = 7.5\npitch_mm = 0.3\ndepth_mm = 40\n")
    assert cfg.fc == pytest.approx(7.5e6)
    assert cfg.pitch == pytest.approx(0.3e-3)
    assert cfg.depth == pytest.approx(40e-3)

    with pytest.raises(ConfigError) as err:
        parse_config_text("bogus_key = 1\n")
    assert err.value.code == "config.key"
    with pytest.raises(ConfigError) as err:
        parse_config_text("fc_mhz")
    assert err.value.code == "config.syntax"
    with pytest.raises(ConfigError) as err:
        parse_config_text("fc_mhz = abc")
    assert err.value.code == "config.value"


def test_config_env_override(tmp_path):
    path = tmp_path / "sim.cfg"
    path.write_text("fc_mhz = 5\n")
    cfg = load_config(str(path), environ={"UPSF_FC_MHZ": "3", "UPSF_DEPTH_MM": "12"})
    assert cfg.fc == pytest.approx(3e6)
    assert cfg.depth == pytest.approx(12e-3)


def test_real_patch_validation(grid64):
    data = np.zeros(grid64.shape)
    RealPatch(grid=grid64, kind=PatchKind.RF, data=data)  # fine
    with pytest.raises(ValueError):
        RealPatch(grid=grid64, kind=PatchKind.RF, data=np.zeros((3, 3)))
    bad = data.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        RealPatch(grid=grid64, kind=PatchKind.RF, data=bad)
