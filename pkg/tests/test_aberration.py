import math

import numpy as np
import pytest

import upsf
from upsf.aberration import Pulse, generate_phase_screen, simulate_psf
from upsf.core import SimulationError


def test_pulse_bandwidth_convention():
    pulse = Pulse.from_bandwidth(5e6, 0.6)
    sigma_f = 0.6 * 5e6 / (2 * math.sqrt(2 * math.log(2)))
    assert pulse.sigma_t == pytest.approx(1 / (2 * math.pi * sigma_f), rel=1e-12)
    assert pulse(0.0) == 1.0
    # FWHM of the spectral envelope equals the fractional bandwidth times fc:
    # |P(fc + B*fc/2)| = |P(fc)| / 2 for the Gaussian envelope.
    half = 0.6 * 5e6 / 2
    ratio = np.exp(-0.5 * (2 * np.pi * half * pulse.sigma_t) ** 2)
    assert ratio == pytest.approx(0.5, rel=1e-12)


def test_zero_max_phase_gives_zero_delays(cfg0):
    profile = generate_phase_screen(cfg0, seed=3)
    assert np.all(profile.delays == 0.0)


def test_screen_peak_phase_matches_config(cfg):
    profile = generate_phase_screen(cfg, seed=3)
    peak = np.max(np.abs(profile.phases(cfg.fc)))
    assert peak == pytest.approx(cfg.max_phase_error, rel=1e-12)


def test_screen_deterministic_and_seed_sensitive(cfg):
    a = generate_phase_screen(cfg, seed=5)
    b = generate_phase_screen(cfg, seed=5)
    c = generate_phase_screen(cfg, seed=6)
    assert np.array_equal(a.delays, b.delays)
    assert not np.array_equal(a.delays, c.delays)


def test_screen_is_smooth_at_correlation_scale(cfg):
    # Neighboring elements (0.3 mm apart, 5 mm correlation) must be close.
    profile = generate_phase_screen(cfg, seed=3)
    phases = profile.phases(cfg.fc)
    step = np.max(np.abs(np.diff(phases)))
    assert step < 0.2 * cfg.max_phase_error


def test_screen_autocorrelation_width_matches_kernel(cfg):
    """Monte-Carlo autocorrelation against the analytic Gaussian-kernel law.

    White noise smoothed with a Gaussian kernel of std s has autocorrelation
    exp(-d^2 / (4 s^2)), whose e^-1 width is 2 s = corr_length.
    """
    n = cfg.n_elements
    acc = np.zeros(n)
    n_seeds = 600
    for seed in range(n_seeds):
        phi = generate_phase_screen(cfg, seed=seed).phases(cfg.fc)
        spec = np.fft.rfft(phi, 2 * n)
        acf = np.fft.irfft(spec * np.conj(spec), 2 * n)[:n]
        acc += acf
    acc /= acc[0]
    # first crossing of e^-1, linearly interpolated
    target = math.exp(-1.0)
    idx = int(np.argmax(acc < target))
    frac = (acc[idx - 1] - target) / (acc[idx - 1] - acc[idx])
    width_elements = (idx - 1) + frac
    expected = cfg.corr_length / cfg.pitch  # 2 * kernel std, in element units
    assert abs(width_elements - expected) / expected < 0.20


def test_unaberrated_psf_lateral_symmetry(psf0_64, grid64):
    h = psf0_64.data
    c = grid64.nx // 2
    cols = np.arange(1, grid64.nx)
    mirror = 2 * c - cols
    ok = (mirror >= 0) & (mirror < grid64.nx)
    asym = np.max(np.abs(h[:, cols[ok]] - h[:, mirror[ok]]))
    assert asym <= 1e-6


def test_unaberrated_psf_peak_at_center(psf0_64, grid64):
    env = upsf.envelope(psf0_64).data
    assert np.unravel_index(np.argmax(env), env.shape) == grid64.center_index
    assert psf0_64.data[grid64.center_index] == 1.0


def test_psf_beamwidth_against_oversampled_oracle(cfg0):
    """-6 dB two-way lateral width vs the same sum at 4x lateral sampling."""
    from upsf.core import Grid

    lam = cfg0.wavelength
    profile = generate_phase_screen(cfg0, seed=1)

    def width_at(grid):
        psf = simulate_psf(cfg0, profile, grid)
        env = upsf.envelope(psf).data
        row = env[grid.nz // 2]
        row = row / row.max()
        above = np.nonzero(row >= 0.5)[0]
        return (above[-1] - above[0] + 1) * grid.dx

    nz = 48
    g1 = upsf.grid_from_config(cfg0, nx=160, nz=nz)
    dx4 = g1.dx / 4
    g4 = Grid(nx=640, nz=nz, dx=dx4, dz=g1.dz,
              origin=(-dx4 * 320, cfg0.depth - g1.dz * (nz // 2)), wavelength=lam)
    w1, w4 = width_at(g1), width_at(g4)
    assert abs(w1 - w4) / w4 < 0.15


def test_psf_determinism(cfg, grid64):
    profile = generate_phase_screen(cfg, seed=9)
    h1 = simulate_psf(cfg, profile, grid64)
    h2 = simulate_psf(cfg, profile, grid64)
    assert np.array_equal(h1.data, h2.data)


def test_psf_db_peak_is_dynamic_range(cfg, grid64):
    profile = generate_phase_screen(cfg, seed=2)
    psf = simulate_psf(cfg, profile, grid64)
    db = upsf.bmode(psf, cfg.dynamic_range)
    assert db.data.max() == cfg.dynamic_range
    assert np.isfinite(psf.data).all()


def test_empty_aperture_raises(cfg):
    # A grid far off to the side of the array sees no active elements.
    from upsf.core import Grid

    lam = cfg.wavelength
    grid = Grid(nx=8, nz=8, dx=lam / 32, dz=lam / 16,
                origin=(1.0, 1e-5), wavelength=lam)  # 1 m off-axis, 10 um deep
    profile = generate_phase_screen(cfg, seed=0)
    with pytest.raises(SimulationError):
        simulate_psf(cfg, profile, grid)


def test_aberrated_sidelobe_ratio_exceeds_baseline(cfg0, grid64):
    """Quick directional check; the full sweep runs in the acceptance suite."""
    from dataclasses import replace

    from upsf.metrics import sidelobe_energy_ratio

    base = replace(cfg0, depth=0.040, fractional_bandwidth=0.8)
    grid = upsf.grid_from_config(base, nx=256, nz=32)
    r0 = sidelobe_energy_ratio(simulate_psf(base, generate_phase_screen(base, 1), grid))
    worst = base.with_max_phase_error(math.pi / 2)
    ratios = [
        sidelobe_energy_ratio(simulate_psf(worst, generate_phase_screen(worst, s), grid))
        for s in range(4)
    ]
    assert np.mean(ratios) > r0
