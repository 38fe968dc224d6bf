"""Training losses: pixel-wise, SSIM, feature-pyramid, and B-mode variants.

The B-mode variants push both prediction and target through a
differentiable envelope-detection + log-compression chain before applying
the base loss; k-space inputs are first mapped back to the spatial domain
by the centered inverse FFT. The feature loss substitutes a frozen,
seeded random-filter convolution pyramid for a pretrained feature
extractor, keeping the multi-scale structural comparison without any
external weights.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    ComplexTensor,
    Tensor,
    concat_channels,
    conv2d,
    hilbert_rows,
    ifft2_centered_pair,
    leaky_relu,
)

__all__ = [
    "LOSS_KINDS",
    "bmode_chain",
    "bmode_chain_kspace",
    "l1_loss",
    "l2_loss",
    "ssim_loss",
    "FeaturePyramid",
    "loss",
]

LOSS_KINDS = (
    "l1",
    "l2",
    "ssim",
    "feature",
    "l1_bmode",
    "l2_bmode",
    "ssim_bmode",
    "feature_bmode",
)

# Smoothing floor for the differentiable magnitude, relative to the peak.
MAGNITUDE_DELTA_REL = 1e-6
LOG_EPS_REL = 1e-12


def bmode_chain(y: Tensor, dynamic_range: float = 60.0) -> Tensor:
    """Differentiable RF -> B-mode chain: envelope then normalized log.

    The envelope uses the smoothed magnitude sqrt(rf^2 + hilbert^2 + delta^2)
    with delta = 1e-6 of the current peak (held constant for the gradient),
    and the log is normalized to the running maximum so the output lies in
    [0, dynamic_range] with the peak exactly at the top.
    """
    h = hilbert_rows(y)
    power = y * y + h * h
    peak_sq = float(power.data.max())
    if peak_sq <= 0.0:
        raise ValueError("bmode_chain requires a non-zero input")
    delta_sq = (MAGNITUDE_DELTA_REL**2) * peak_sq
    env = (power + delta_sq).sqrt()

    eps = LOG_EPS_REL * float(env.data.max())
    shifted = env + eps
    ratio = shifted / shifted.max()
    db = (ratio.log10() * 20.0).clamp(-dynamic_range, 0.0) + dynamic_range
    return db


def bmode_chain_kspace(z: ComplexTensor, dynamic_range: float = 60.0) -> Tensor:
    """B-mode chain for k-space tensors: centered inverse FFT first.

    The real part of the inverse transform is the RF estimate (the target
    spectrum of a real RF patch is Hermitian, so its inverse is real).
    """
    rf = ifft2_centered_pair(z).re
    return bmode_chain(rf, dynamic_range)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    return (pred - target).abs().mean()


def l2_loss(pred: Tensor, target: Tensor) -> Tensor:
    diff = pred - target
    return (diff * diff).mean()


def _gaussian_kernel(window: int, sigma: float, dtype) -> np.ndarray:
    half = (window - 1) / 2.0
    t = np.arange(window) - half
    g = np.exp(-0.5 * (t / sigma) ** 2)
    w = np.outer(g, g)
    return (w / w.sum()).astype(dtype)


def ssim_loss(
    pred: Tensor,
    target: Tensor,
    data_range: float = 1.0,
    window: int = 11,
    sigma: float = 1.5,
) -> Tensor:
    """1 - mean local SSIM with a Gaussian window at valid positions.

    Single-channel inputs only; ``window`` may be shrunk for small patches.
    """
    c, hgt, wid = pred.data.shape
    if c != 1:
        raise ValueError(f"ssim_loss expects a single channel, got {c}")
    if window > min(hgt, wid):
        raise ValueError(f"window {window} larger than input {hgt}x{wid}")
    kernel = _gaussian_kernel(window, sigma, pred.data.dtype)
    w = Tensor(kernel[None, None])  # (1,1,k,k), frozen

    mu_x = conv2d(pred, w, None, 1, 0)
    mu_y = conv2d(target, w, None, 1, 0)
    xx = conv2d(pred * pred, w, None, 1, 0) - mu_x * mu_x
    yy = conv2d(target * target, w, None, 1, 0) - mu_y * mu_y
    xy = conv2d(pred * target, w, None, 1, 0) - mu_x * mu_y

    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    num = (mu_x * mu_y * 2.0 + c1) * (xy * 2.0 + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return 1.0 - (num / den).mean()


class FeaturePyramid:
    """Frozen seeded multi-scale feature extractor for the feature loss.

    Four stride-2 convolution stages with LeakyReLU; weights are drawn once
    from a seeded generator and never trained.
    """

    def __init__(self, in_channels: int, seed: int = 17, levels: int = 4, base: int = 8, slope: float = 0.2, dtype=np.float64):
        rng = np.random.Generator(np.random.PCG64(seed))
        self.slope = slope
        self.weights: list[tuple[Tensor, Tensor]] = []
        cin = in_channels
        cout = base
        for _ in range(levels):
            std = np.sqrt(2.0 / ((1.0 + slope**2) * cin * 9))
            w = Tensor((rng.standard_normal((cout, cin, 3, 3)) * std).astype(dtype))
            b = Tensor(np.zeros(cout, dtype=dtype))
            self.weights.append((w, b))
            cin, cout = cout, cout * 2

    def features(self, x: Tensor) -> list[Tensor]:
        feats = []
        h = x
        for w, b in self.weights:
            h = leaky_relu(conv2d(h, w, b, 2, 1), self.slope)
            feats.append(h)
        return feats


def feature_loss(pred: Tensor, target: Tensor, pyramid: FeaturePyramid) -> Tensor:
    total = None
    for fp, ft in zip(pyramid.features(pred), pyramid.features(target)):
        term = l2_loss(fp, ft)
        total = term if total is None else total + term
    return total


_PYRAMIDS: dict[tuple[int, object], FeaturePyramid] = {}


def _pyramid_for(channels: int, dtype) -> FeaturePyramid:
    key = (channels, np.dtype(dtype).name)
    if key not in _PYRAMIDS:
        _PYRAMIDS[key] = FeaturePyramid(channels, dtype=dtype)
    return _PYRAMIDS[key]


def _raw_loss(kind: str, pred: Tensor, target: Tensor, data_range: float) -> Tensor:
    if kind == "l1":
        return l1_loss(pred, target)
    if kind == "l2":
        return l2_loss(pred, target)
    if kind == "ssim":
        window = min(11, min(pred.data.shape[1:]))
        window -= (window + 1) % 2  # keep odd
        return ssim_loss(pred, target, data_range, window)
    if kind == "feature":
        return feature_loss(pred, target, _pyramid_for(pred.data.shape[0], pred.data.dtype))
    raise ValueError(f"unknown loss kind {kind!r}")


def loss(
    kind: str,
    pred: Tensor | ComplexTensor,
    target: Tensor | ComplexTensor,
    dynamic_range: float = 60.0,
) -> Tensor:
    """Dispatch a loss by name.

    Real tensors are RF-domain; ComplexTensors are k-space. ``*_bmode``
    kinds run both arguments through the B-mode chain first (with the
    inverse FFT prepended for k-space) and compare the resulting
    [0, dynamic_range] images.
    """
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    is_complex = isinstance(pred, ComplexTensor)
    if is_complex != isinstance(target, ComplexTensor):
        raise ValueError("prediction and target must live in the same domain")

    if kind.endswith("_bmode"):
        base = kind[: -len("_bmode")]
        if is_complex:
            pred_db = bmode_chain_kspace(pred, dynamic_range)
            target_db = bmode_chain_kspace(target, dynamic_range)
        else:
            pred_db = bmode_chain(pred, dynamic_range)
            target_db = bmode_chain(target, dynamic_range)
        return _raw_loss(base, pred_db, target_db, dynamic_range)

    if not is_complex:
        return _raw_loss(kind, pred, target, 1.0)

    if kind == "feature":
        # Stack real/imag as channels so the pyramid sees the full signal.
        pred_2ch = concat_channels(pred.re, pred.im)
        target_2ch = concat_channels(target.re, target.im)
        return feature_loss(pred_2ch, target_2ch, _pyramid_for(2, pred_2ch.data.dtype))
    part_re = _raw_loss(kind, pred.re, target.re, 1.0)
    part_im = _raw_loss(kind, pred.im, target.im, 1.0)
    return (part_re + part_im) * 0.5
