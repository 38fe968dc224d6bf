"""Deterministic signal chain: demodulation, envelope, log compression, FFTs.

Axial sampling is tied to the grid by the pulse-echo range mapping: a
sample at depth z corresponds to two-way time t = 2 z / c, so the column
sampling rate is fs = c / (2 * dz).
"""

from __future__ import annotations

import numpy as np
from scipy.signal import hilbert

from .core import ComplexKind, ComplexPatch, PatchKind, RealPatch

__all__ = [
    "baseband_demodulate",
    "envelope",
    "log_compress",
    "bmode",
    "fft2_centered",
    "ifft2_centered",
    "fft2c_array",
    "ifft2c_array",
]

# Relative regularizer added before the log; sits far below any displayed
# dynamic range (1e-12 of peak = -240 dB).
LOG_EPS_REL = 1e-12


def baseband_demodulate(rf: RealPatch, fc: float, c: float = 1540.0) -> ComplexPatch:
    """Complex baseband of an RF patch via the analytic-signal method.

    Each axial column is converted to its analytic signal (positive
    frequencies only) and mixed down by exp(-i 2 pi fc t) on the two-way
    time axis t = 2 z / c. The magnitude equals the envelope.
    """
    if rf.kind is not PatchKind.RF:
        raise ValueError(f"baseband_demodulate expects an RF patch, got {rf.kind}")
    if not fc > 0:
        raise ValueError(f"fc must be positive, got {fc}")
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")

    t = 2.0 * rf.grid.z_coords() / c  # (nz,) two-way time per row
    analytic = hilbert(rf.data, axis=0)
    data = analytic * np.exp(-2j * np.pi * fc * t)[:, None]
    return ComplexPatch(grid=rf.grid, kind=ComplexKind.BASEBAND, data=data)


def envelope(rf: RealPatch) -> RealPatch:
    """Envelope image: magnitude of the complex baseband.

    The carrier mixing has unit modulus, so the envelope is the magnitude
    of the analytic signal regardless of the demodulation frequency.
    """
    if rf.kind is not PatchKind.RF:
        raise ValueError(f"envelope expects an RF patch, got {rf.kind}")
    return RealPatch(grid=rf.grid, kind=PatchKind.ENVELOPE, data=np.abs(hilbert(rf.data, axis=0)))


def log_compress(env: RealPatch, dynamic_range: float = 60.0) -> RealPatch:
    """Log-compress an envelope to a [0, dynamic_range] dB image.

    The image is normalized to its peak, floored at -dynamic_range dB and
    shifted up so the floor maps to 0 and the peak to exactly
    ``dynamic_range``.
    """
    if env.kind is not PatchKind.ENVELOPE:
        raise ValueError(f"log_compress expects an envelope patch, got {env.kind}")
    if np.any(env.data < 0):
        raise ValueError("envelope must be nonnegative")
    peak = float(np.max(env.data))
    if peak <= 0.0:
        raise ValueError("cannot log-compress an all-zero envelope")
    eps = LOG_EPS_REL * peak
    db = 20.0 * np.log10((env.data + eps) / (peak + eps))
    db = np.clip(db, -dynamic_range, 0.0) + dynamic_range
    return RealPatch(grid=env.grid, kind=PatchKind.DECIBEL, data=db)


def bmode(rf: RealPatch, dynamic_range: float = 60.0) -> RealPatch:
    """RF to B-mode: envelope detection followed by log compression."""
    return log_compress(envelope(rf), dynamic_range)


def fft2c_array(data: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2D FFT over the last two axes.

    Pixel (nz//2, nx//2) is treated as the spatial origin and becomes the
    DC bin, so centered even-symmetric real inputs transform to real
    spectra.
    """
    axes = (-2, -1)
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(data, axes=axes), axes=axes, norm="ortho"), axes=axes)


def ifft2c_array(data: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c_array`."""
    axes = (-2, -1)
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(data, axes=axes), axes=axes, norm="ortho"), axes=axes)


def fft2_centered(patch: RealPatch | ComplexPatch) -> ComplexPatch:
    """Orthonormal 2D FFT with the DC bin at the grid center pixel."""
    return ComplexPatch(grid=patch.grid, kind=ComplexKind.KSPACE, data=fft2c_array(patch.data))


def ifft2_centered(patch: ComplexPatch) -> ComplexPatch:
    """Exact inverse of :func:`fft2_centered`; returns spatial-domain samples."""
    return ComplexPatch(grid=patch.grid, kind=ComplexKind.BASEBAND, data=ifft2c_array(patch.data))
