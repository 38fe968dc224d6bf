"""PSF similarity metrics on log-compressed images.

All comparisons operate on [0, dynamic_range] dB images: mean local SSIM,
the L2 distance between laterally projected beam patterns (LBPD), and
intersection-over-union of intensity bands. A sidelobe-to-mainlobe energy
ratio on RF PSFs supports aberration-level experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy.signal import fftconvolve

from .core import GridMismatchError, PatchKind, RealPatch
from .sigproc import bmode, envelope

__all__ = [
    "MetricsReport",
    "ssim_db",
    "lbpd",
    "iou_bands",
    "sidelobe_energy_ratio",
    "report_for",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class MetricsReport:
    """Similarity scores for one predicted PSF against its target."""

    ssim: float
    lbpd: float
    iou1: float  # mainlobe band [2/3 dr, dr]
    iou2: float  # near-sidelobe band [1/3 dr, 2/3 dr)
    iou3: float  # far-sidelobe band [0, 1/3 dr)
    iou_mean: float
    sidelobe_ratio: float

    def to_dict(self) -> dict:
        return {
            "ssim": self.ssim,
            "lbpd": self.lbpd,
            "iou1": self.iou1,
            "iou2": self.iou2,
            "iou3": self.iou3,
            "iou_mean": self.iou_mean,
            "sidelobe_ratio": self.sidelobe_ratio,
        }


def _check_db_pair(a: RealPatch, b: RealPatch):
    if a.kind is not PatchKind.DECIBEL or b.kind is not PatchKind.DECIBEL:
        raise ValueError(f"expected two decibel patches, got {a.kind} and {b.kind}")
    if not a.grid.compatible(b.grid):
        raise GridMismatchError(f"incompatible grids: {a.grid.shape} vs {b.grid.shape}")


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    t = np.arange(size) - half
    g = np.exp(-0.5 * (t / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def ssim_db(a: RealPatch, b: RealPatch, dynamic_range: float = 60.0) -> float:
    """Mean local SSIM between two dB images.

    Uses an 11x11 Gaussian window (sigma 1.5) evaluated at fully interior
    positions only, with stability constants C1 = (0.01 L)^2 and
    C2 = (0.03 L)^2 for L = dynamic_range.
    """
    _check_db_pair(a, b)
    if a.grid.nz < SSIM_WINDOW or a.grid.nx < SSIM_WINDOW:
        raise ValueError(f"patch {a.grid.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    x, y = a.data, b.data

    mu_x = fftconvolve(x, w, mode="valid")
    mu_y = fftconvolve(y, w, mode="valid")
    xx = fftconvolve(x * x, w, mode="valid") - mu_x * mu_x
    yy = fftconvolve(y * y, w, mode="valid") - mu_y * mu_y
    xy = fftconvolve(x * y, w, mode="valid") - mu_x * mu_y

    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def lateral_beam_pattern(db_patch: RealPatch) -> np.ndarray:
    """Axial mean of a dB image: the projected lateral beam pattern."""
    if db_patch.kind is not PatchKind.DECIBEL:
        raise ValueError(f"expected a decibel patch, got {db_patch.kind}")
    return db_patch.data.mean(axis=0)


def lbpd(a: RealPatch, b: RealPatch) -> float:
    """L2 distance between the projected lateral beam patterns."""
    _check_db_pair(a, b)
    diff = lateral_beam_pattern(a) - lateral_beam_pattern(b)
    return float(np.sqrt(np.sum(diff * diff)))


def iou_bands(a: RealPatch, b: RealPatch, dynamic_range: float = 60.0) -> tuple[float, float, float, float]:
    """Intersection-over-union of intensity bands of two dB images.

    The dynamic range is split into three equal bands (20 dB each for the
    60 dB default): mainlobe [2L/3, L] (top closed), near sidelobe
    [1/3 L, 2/3 L), far sidelobe [0, 1/3 L). A band missing from both
    images scores 1. Returns (iou1, iou2, iou3, mean).
    """
    _check_db_pair(a, b)
    third = dynamic_range / 3.0
    edges = [(2 * third, dynamic_range, True), (third, 2 * third, False), (0.0, third, False)]
    scores = []
    for lo, hi, top in edges:
        in_a = (a.data >= lo) & ((a.data <= hi) if top else (a.data < hi))
        in_b = (b.data >= lo) & ((b.data <= hi) if top else (b.data < hi))
        union = np.count_nonzero(in_a | in_b)
        if union == 0:
            scores.append(1.0)
        else:
            scores.append(np.count_nonzero(in_a & in_b) / union)
    iou1, iou2, iou3 = scores
    return (iou1, iou2, iou3, (iou1 + iou2 + iou3) / 3.0)


def _first_crossing_extent(profile: np.ndarray, start: int, threshold: float) -> tuple[int, int]:
    """Index range around ``start`` up to the first drop below ``threshold``."""
    lo = start
    while lo > 0 and profile[lo - 1] >= threshold:
        lo -= 1
    hi = start
    while hi < profile.size - 1 and profile[hi + 1] >= threshold:
        hi += 1
    return lo, hi


def sidelobe_energy_ratio(psf_rf: RealPatch) -> float:
    """Energy outside the mainlobe divided by energy inside.

    The mainlobe region is the bounding box of the envelope's -20 dB
    contour around the peak, measured where the profiles through the peak
    first fall below -20 dB (axially and laterally); energy is the sum of
    squared RF samples. Grows as aberration scatters energy into
    sidelobes.
    """
    if psf_rf.kind is not PatchKind.RF:
        raise ValueError(f"expected an RF patch, got {psf_rf.kind}")
    env = envelope(psf_rf).data
    peak = env.max()
    if peak <= 0.0:
        raise ValueError("degenerate all-zero PSF")

    threshold = peak * 10.0 ** (-20.0 / 20.0)
    pk_r, pk_c = np.unravel_index(int(np.argmax(env)), env.shape)
    r0, r1 = _first_crossing_extent(env[:, pk_c], pk_r, threshold)
    c0, c1 = _first_crossing_extent(env[pk_r, :], pk_c, threshold)

    energy = psf_rf.data**2
    inside = float(energy[r0 : r1 + 1, c0 : c1 + 1].sum())
    total = float(energy.sum())
    if inside == 0.0:
        raise ValueError("degenerate mainlobe with zero energy")
    return (total - inside) / inside


def report_for(pred_rf: RealPatch, target_rf: RealPatch, dynamic_range: float = 60.0) -> MetricsReport:
    """Full metric report for a predicted RF PSF against its target."""
    pred_db = bmode(pred_rf, dynamic_range)
    target_db = bmode(target_rf, dynamic_range)
    iou1, iou2, iou3, iou_mean = iou_bands(pred_db, target_db, dynamic_range)
    return MetricsReport(
        ssim=ssim_db(pred_db, target_db, dynamic_range),
        lbpd=lbpd(pred_db, target_db),
        iou1=iou1,
        iou2=iou2,
        iou3=iou3,
        iou_mean=iou_mean,
        sidelobe_ratio=sidelobe_energy_ratio(pred_rf),
    )
