import numpy as np
import pytest

import upsf
from upsf.core import GridMismatchError, PatchKind, RealPatch
from upsf.metrics import iou_bands, lbpd, report_for, sidelobe_energy_ratio, ssim_db


def _db(grid, data):
    return RealPatch(grid=grid, kind=PatchKind.DECIBEL, data=data)


def _random_db(grid, rng):
    return _db(grid, rng.uniform(0.0, 60.0, size=grid.shape))


def test_identities_on_random_patches(grid64, rng):
    for _ in range(10):
        x = _random_db(grid64, rng)
        assert ssim_db(x, x) == 1.0
        assert lbpd(x, x) == 0.0
        assert iou_bands(x, x) == (1.0, 1.0, 1.0, 1.0)


def test_ssim_penalizes_anticorrelation(grid64, rng):
    x = _random_db(grid64, rng)
    y = _db(grid64, 60.0 - x.data)
    assert ssim_db(x, y) < 1.0


def test_ssim_symmetric_and_bounded(grid64, rng):
    x = _random_db(grid64, rng)
    y = _random_db(grid64, rng)
    sxy = ssim_db(x, y)
    assert sxy == pytest.approx(ssim_db(y, x), abs=1e-12)
    assert -1.0 <= sxy <= 1.0


def test_ssim_grid_mismatch(grid64, rng):
    other = upsf.grid_from_config(upsf.default_config(), 32, 32)
    with pytest.raises(GridMismatchError):
        ssim_db(_random_db(grid64, rng), _random_db(other, rng))


def test_lbpd_constant_column_offset(grid64, rng):
    # values kept in [0, 59] so the +1 dB shift stays clamp-free
    a = _db(grid64, rng.uniform(0.0, 59.0, size=grid64.shape))
    b = _db(grid64, a.data + 1.0)
    assert lbpd(a, b) == pytest.approx(np.sqrt(grid64.nx), rel=1e-12)
    assert lbpd(a, b) == lbpd(b, a)


def test_iou_hand_case():
    # 4x4 grid: band 1 ([40, 60]) occupies 4 center pixels in a; b keeps two
    # of them and adds two others -> intersection 2, union 6.
    g = upsf.grid_from_config(upsf.default_config(), 4, 4)
    a = np.full((4, 4), 10.0)
    b = np.full((4, 4), 10.0)
    a[1:3, 1:3] = 50.0
    b[1, 1] = 50.0
    b[2, 2] = 50.0
    b[0, 0] = 50.0
    b[3, 3] = 50.0
    iou1, iou2, iou3, mean = iou_bands(_db(g, a), _db(g, b))
    assert iou1 == pytest.approx(2.0 / 6.0)
    assert iou2 == 1.0  # band empty in both -> defined as 1
    # far band: 10 background pixels shared, 14 in the union of backgrounds
    assert iou3 == pytest.approx(10.0 / 14.0)
    assert mean == pytest.approx((iou1 + iou2 + iou3) / 3.0)


def test_iou_band_edges():
    g = upsf.grid_from_config(upsf.default_config(), 4, 4)
    a = np.zeros((4, 4))
    b = np.zeros((4, 4))
    a[0, 0] = 60.0  # top edge belongs to band 1
    b[0, 0] = 40.0  # bottom edge of band 1 (closed)
    a[1, 1] = 39.999  # just below -> band 2
    b[1, 1] = 20.0  # band 2 lower edge
    iou1, iou2, iou3, _ = iou_bands(_db(g, a), _db(g, b))
    assert iou1 == 1.0
    assert iou2 == 1.0


def test_iou_symmetry_and_permutation_within_band(grid64, rng):
    a = _random_db(grid64, rng)
    b = _random_db(grid64, rng)
    assert iou_bands(a, b) == iou_bands(b, a)
    # permuting values within a band keeps the banded sets identical
    data = a.data.copy()
    band1 = (data >= 40.0)
    vals = data[band1]
    data[band1] = vals[::-1]
    assert iou_bands(a, _db(grid64, data)) == (1.0, 1.0, 1.0, 1.0)


def test_sidelobe_ratio_single_pixel_is_zero(grid64):
    data = np.zeros(grid64.shape)
    data[grid64.center_index] = 1.0
    psf = RealPatch(grid=grid64, kind=PatchKind.RF, data=data)
    assert sidelobe_energy_ratio(psf) == 0.0


def test_sidelobe_ratio_rejects_zero(grid64):
    psf = RealPatch(grid=grid64, kind=PatchKind.RF, data=np.zeros(grid64.shape))
    with pytest.raises(ValueError):
        sidelobe_energy_ratio(psf)


def test_sidelobe_ratio_positive_for_real_psf(psf0_64):
    r0 = sidelobe_energy_ratio(psf0_64)
    assert r0 > 0.0


def test_report_for_identity(psf0_64):
    rep = report_for(psf0_64, psf0_64)
    assert rep.ssim == 1.0
    assert rep.lbpd == 0.0
    assert rep.iou_mean == 1.0
    assert rep.iou_mean == pytest.approx((rep.iou1 + rep.iou2 + rep.iou3) / 3)
    d = rep.to_dict()
    assert set(d) == {"ssim", "lbpd", "iou1", "iou2", "iou3", "iou_mean", "sidelobe_ratio"}
