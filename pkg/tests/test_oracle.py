import math

import numpy as np
import pytest

import upsf
from upsf.core import PatchKind, RealPatch
from upsf.oracle import recovery_grid, run_recovery_check, wiener_recover_psf
from upsf.speckle import convolve, generate_scatterers


@pytest.fixture(scope="module")
def recovery_setup():
    """PSF and interior-supported scatterers on the oracle's compact grid."""
    cfg = upsf.default_config().with_max_phase_error(0.0)
    grid = recovery_grid(cfg, 128, 128)
    profile = upsf.generate_phase_screen(cfg, seed=1)
    psf = upsf.simulate_psf(cfg, profile, grid)
    scat = generate_scatterers(grid, seed=77, margin=32)
    speckle = convolve(scat, psf)
    return psf, scat, speckle


def test_delta_scatterer_recovery_is_exact(grid64, psf0_64):
    f = np.zeros(grid64.shape)
    f[grid64.center_index] = 1.0
    delta = RealPatch(grid=grid64, kind=PatchKind.SCATTERER, data=f)
    speckle = convolve(delta, psf0_64)
    recovered = wiener_recover_psf(speckle, delta, eps=1e-9)
    rel = np.linalg.norm(recovered.data - psf0_64.data) / np.linalg.norm(psf0_64.data)
    assert rel <= 1e-6


def test_recovery_quality_with_random_scatterers(recovery_setup):
    psf, scat, speckle = recovery_setup
    recovered = wiener_recover_psf(speckle, scat, eps=1e-6)
    score = upsf.ssim_db(upsf.bmode(recovered), upsf.bmode(psf))
    assert score >= 0.98


def test_recovery_error_decreases_with_eps(recovery_setup):
    psf, scat, speckle = recovery_setup
    errs = []
    for eps in (1e-2, 1e-4, 1e-6):
        rec = wiener_recover_psf(speckle, scat, eps=eps)
        errs.append(np.linalg.norm(rec.data - psf.data))
    assert errs[0] > errs[1] > errs[2]


def test_heavy_damping_degrades_recovery(recovery_setup):
    psf, scat, speckle = recovery_setup
    good = wiener_recover_psf(speckle, scat, eps=1e-6)
    damped = wiener_recover_psf(speckle, scat, eps=1.0)
    s_good = upsf.ssim_db(upsf.bmode(good), upsf.bmode(psf))
    s_damped = upsf.ssim_db(upsf.bmode(damped), upsf.bmode(psf))
    assert s_damped < s_good


def test_full_recovery_check_at_one_level():
    cfg = upsf.default_config()
    results = run_recovery_check(cfg, [math.pi / 2], seed=5)
    assert results[0]["ssim"] >= 0.98
    assert results[0]["iou_mean"] >= 0.9


def test_eps_and_grid_validation(recovery_setup):
    psf, scat, speckle = recovery_setup
    with pytest.raises(ValueError):
        wiener_recover_psf(speckle, scat, eps=0.0)
    other = upsf.grid_from_config(upsf.default_config(), 32, 32)
    small = RealPatch(grid=other, kind=PatchKind.SCATTERER, data=np.zeros(other.shape))
    with pytest.raises(upsf.GridMismatchError):
        wiener_recover_psf(speckle, small)
