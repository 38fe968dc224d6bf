"""Near-field phase screens and two-way STA point spread function synthesis.

The imaging system is modeled as a linear array with dynamic two-way
focusing at every pixel (synthetic transmit aperture). Phase aberration is
a per-element time-delay screen applied once on transmit and once on
receive. The array response is evaluated in closed form, without element
directivity or attenuation, which keeps the synthesis reproducible while
preserving the effects of interest: mainlobe width, aberration-induced
sidelobes, and amplitude asymmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .core import Grid, PatchKind, RealPatch, SimConfig, SimulationError

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

__all__ = ["AberrationProfile", "Pulse", "generate_phase_screen", "simulate_psf", "ABERRATION_LEVELS"]

ABERRATION_LEVELS = (0.0, math.pi / 4, 3 * math.pi / 8, math.pi / 2)

APODIZATIONS = ("rect", "hann")

# Chunk of pixels processed at once in the numpy fallback; bounds the size
# of the (pixels, elements, elements) delay tensor.
_PIXEL_CHUNK = 512


@dataclass(frozen=True)
class AberrationProfile:
    """Per-element time delays realizing a near-field phase screen.

    ``max(abs(2*pi*fc*delays)) == max_phase_error`` up to floating rounding,
    and the delays are exactly zero when ``max_phase_error`` is zero.
    """

    delays: np.ndarray  # per-element delay [s]
    max_phase_error: float  # radians at fc
    corr_length: float  # [m]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=np.float64))

    def phases(self, fc: float) -> np.ndarray:
        """Phase error of each element at frequency ``fc`` [rad]."""
        return 2.0 * math.pi * fc * self.delays


@dataclass(frozen=True)
class Pulse:
    """Gaussian-windowed cosine transmit pulse.

    ``sigma_t`` is the envelope standard deviation; it is derived from a
    FWHM fractional bandwidth B via sigma_f = B*fc / (2*sqrt(2 ln 2)) and
    sigma_t = 1 / (2*pi*sigma_f).
    """

    fc: float  # [Hz]
    sigma_t: float  # [s]

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")

    @classmethod
    def from_bandwidth(cls, fc: float, fractional_bandwidth: float) -> "Pulse":
        sigma_f = fractional_bandwidth * fc / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return cls(fc=fc, sigma_t=1.0 / (2.0 * math.pi * sigma_f))

    def __call__(self, t: np.ndarray) -> np.ndarray:
        """Evaluate the pulse at times ``t`` [s]; unit peak at t = 0."""
        t = np.asarray(t)
        return np.exp(-0.5 * (t / self.sigma_t) ** 2) * np.cos(2.0 * math.pi * self.fc * t)


def generate_phase_screen(cfg: SimConfig, seed: int) -> AberrationProfile:
    """Draw a smooth aberration profile across the array.

    I.i.d. standard Gaussian values at the element positions are smoothed
    with a Gaussian kernel of std ``corr_length / 2`` (reflective ends,
    full overlap) and rescaled so the largest absolute phase equals
    ``cfg.max_phase_error`` at ``cfg.fc``. The e^-1 width of the resulting
    profile autocorrelation equals ``corr_length``. Deterministic per seed.
    """
    if cfg.max_phase_error < 0:
        raise ValueError(f"max_phase_error must be >= 0, got {cfg.max_phase_error}")

    rng = np.random.Generator(np.random.PCG64(seed))
    white = rng.standard_normal(cfg.n_elements)

    sigma_elements = (cfg.corr_length / 2.0) / cfg.pitch
    smooth = gaussian_filter1d(white, sigma=sigma_elements, mode="reflect")

    peak = np.max(np.abs(smooth))
    if cfg.max_phase_error == 0.0 or peak == 0.0:
        phases = np.zeros(cfg.n_elements)
    else:
        phases = smooth * (cfg.max_phase_error / peak)

    delays = phases / (2.0 * math.pi * cfg.fc)
    return AberrationProfile(
        delays=delays,
        max_phase_error=cfg.max_phase_error,
        corr_length=cfg.corr_length,
        seed=seed,
    )


if _HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _psf_sum(px, pz, ex, ed, r_focus, inv_c, f_number, hann, inv_two_sigma_sq, two_pi_fc, out):
        n = ex.size
        for p in prange(px.size):
            x = px[p]
            z = pz[p]
            half = z / (2.0 * f_number)
            u_loc = np.empty(n)
            a_loc = np.empty(n)
            m = 0
            for i in range(n):
                off = ex[i] - x
                if off < -half or off > half:
                    continue
                if hann:
                    c = math.cos(0.5 * math.pi * off / half)
                    a_loc[m] = c * c
                else:
                    a_loc[m] = 1.0
                u_loc[m] = (r_focus[i] - math.sqrt(off * off + z * z)) * inv_c + ed[i]
                m += 1
            if m == 0:
                out[p] = np.nan
                continue
            acc = 0.0
            for i in range(m):
                ui = u_loc[i]
                ai = a_loc[i]
                t = 2.0 * ui
                acc += ai * ai * math.exp(-t * t * inv_two_sigma_sq) * math.cos(two_pi_fc * t)
                for j in range(i + 1, m):
                    t = ui + u_loc[j]
                    acc += 2.0 * ai * a_loc[j] * math.exp(-t * t * inv_two_sigma_sq) * math.cos(two_pi_fc * t)
            out[p] = acc


def _psf_sum_numpy(px, pz, ex, ed, r_focus, cfg: SimConfig, pulse: Pulse, hann: bool) -> np.ndarray:
    out = np.empty(px.size)
    for start in range(0, px.size, _PIXEL_CHUNK):
        stop = min(start + _PIXEL_CHUNK, px.size)
        cx = px[start:stop, None]
        cz = pz[start:stop, None]
        half = (cz / cfg.f_number) / 2.0
        off = ex[None, :] - cx
        inside = np.abs(off) <= half
        if not inside.any(axis=1).all():
            out[start:stop] = np.nan
            continue
        if hann:
            apod = np.where(inside, np.cos(0.5 * math.pi * off / half) ** 2, 0.0)
        else:
            apod = inside.astype(np.float64)
        r = np.hypot(off, cz)
        u = (r_focus[None, :] - r) / cfg.c + ed[None, :]
        tau = u[:, :, None] + u[:, None, :]
        out[start:stop] = np.einsum("pi,pij,pj->p", apod, pulse(tau), apod, optimize=True)
    return out


def simulate_psf(
    cfg: SimConfig,
    profile: AberrationProfile,
    grid: Grid,
    apodization: str = "hann",
) -> RealPatch:
    """Synthesize the two-way RF PSF of a point target at (0, cfg.depth).

    For every pixel, all transmit/receive element pairs are summed:

        h(x, z) = sum_ij a_i a_j p(tau_ij)
        tau_ij  = [r_i(0, depth) + r_j(0, depth) - r_i(x, z) - r_j(x, z)] / c
                  + e_i + e_j

    with r_i the element-to-point distance, e_i the screen delay (applied
    on transmit and on receive), p the transmit pulse, and a_i the
    apodization over the active aperture of width z / f_number centered
    above the pixel (elements outside contribute 0). Hann weighting is the
    default so beamforming sidelobes stay far below screen-induced ones;
    uniform ("rect") weighting, whose full-aperture sensitivity to the
    screen is stronger, is available for comparison. The result is
    normalized to unit peak amplitude.

    Raises :class:`SimulationError` if any pixel sees an empty aperture.
    """
    if len(profile.delays) != cfg.n_elements:
        raise ValueError(
            f"profile has {len(profile.delays)} delays for {cfg.n_elements} elements"
        )
    if apodization not in APODIZATIONS:
        raise ValueError(f"apodization must be one of {APODIZATIONS}, got {apodization!r}")

    pulse = Pulse.from_bandwidth(cfg.fc, cfg.fractional_bandwidth)
    elem_x = cfg.element_positions()
    delays = profile.delays

    xs = grid.x_coords()
    zs = grid.z_coords()
    X, Z = np.meshgrid(xs, zs)
    px = X.ravel()
    pz = Z.ravel()

    if np.any(pz <= 0):
        raise SimulationError("grid extends to non-positive depth")

    # Union of active elements over the whole patch: an element can only
    # contribute if it lies within the widest (deepest) aperture of any
    # lateral pixel position.
    half_max = (pz.max() / cfg.f_number) / 2.0
    sel = np.nonzero((elem_x >= xs.min() - half_max) & (elem_x <= xs.max() + half_max))[0]
    if sel.size == 0:
        raise SimulationError("no active elements anywhere in the patch (depth too small for f-number)")

    ex = np.ascontiguousarray(elem_x[sel])
    ed = np.ascontiguousarray(delays[sel])
    r_focus = np.ascontiguousarray(np.hypot(elem_x, cfg.depth)[sel])
    hann = apodization == "hann"

    if _HAVE_NUMBA:
        out = np.empty(px.size)
        inv_two_sigma_sq = 1.0 / (2.0 * pulse.sigma_t**2)
        _psf_sum(
            px, pz, ex, ed, r_focus, 1.0 / cfg.c, cfg.f_number, hann, inv_two_sigma_sq,
            2.0 * math.pi * cfg.fc, out,
        )
    else:
        out = _psf_sum_numpy(px, pz, ex, ed, r_focus, cfg, pulse, hann)

    if np.any(np.isnan(out)):
        raise SimulationError("empty active aperture for some pixels (depth too small for f-number)")

    peak = np.max(np.abs(out))
    if peak == 0.0:
        raise SimulationError("synthesized PSF is identically zero")
    h = (out / peak).reshape(grid.shape)
    return RealPatch(grid=grid, kind=PatchKind.RF, data=h)
