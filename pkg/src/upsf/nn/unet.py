"""Desk-scale U-Net and complex U-Net for image-to-image PSF regression.

Both nets share one topology: a stem convolution, ``levels`` stride-2
downsampling stages, and mirrored nearest-neighbor-upsample stages with
skip concatenation, all 3x3 kernels with LeakyReLU activations and a
linear head. The complex variant carries real/imag weight pairs and
applies the complex product rule inside every convolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    ComplexTensor,
    Tensor,
    concat_channels,
    conv2d,
    leaky_relu,
    upsample2,
)

__all__ = ["ModelConfig", "UNet", "ComplexUNet", "complex_conv2d", "build_model"]


@dataclass(frozen=True)
class ModelConfig:
    levels: int = 3
    base_channels: int = 16
    kernel: int = 3
    slope: float = 0.2  # LeakyReLU negative slope
    domain: str = "rf"  # "rf" or "kspace"

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.kernel % 2 != 1:
            raise ValueError(f"kernel must be odd, got {self.kernel}")
        if self.domain not in ("rf", "kspace"):
            raise ValueError(f"domain must be 'rf' or 'kspace', got {self.domain!r}")


def complex_conv2d(
    x: ComplexTensor,
    w_re: Tensor,
    w_im: Tensor,
    b_re: Tensor | None = None,
    b_im: Tensor | None = None,
    stride: int = 1,
    pad: int = 1,
) -> ComplexTensor:
    """Complex convolution via the product rule on real/imag channels:

    out_re = conv(x_re, w_re) - conv(x_im, w_im)
    out_im = conv(x_re, w_im) + conv(x_im, w_re)
    """
    rr = conv2d(x.re, w_re, b_re, stride, pad)
    ii = conv2d(x.im, w_im, None, stride, pad)
    ri = conv2d(x.re, w_im, b_im, stride, pad)
    ir = conv2d(x.im, w_re, None, stride, pad)
    return ComplexTensor(rr - ii, ri + ir)


def _he_std(fan_in: int, slope: float) -> float:
    return float(np.sqrt(2.0 / ((1.0 + slope**2) * fan_in)))


class _ParamStore:
    """Named parameter registry shared by both network variants."""

    def __init__(self, seed: int, slope: float, dtype=np.float64):
        self.params: dict[str, Tensor] = {}
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.slope = slope
        self.dtype = dtype

    def weight(self, name: str, cout: int, cin: int, k: int, scale: float = 1.0) -> Tensor:
        std = _he_std(cin * k * k, self.slope) * scale
        w = Tensor((self.rng.standard_normal((cout, cin, k, k)) * std).astype(self.dtype), requires_grad=True)
        self.params[name] = w
        return w

    def bias(self, name: str, cout: int) -> Tensor:
        b = Tensor(np.zeros(cout, dtype=self.dtype), requires_grad=True)
        self.params[name] = b
        return b


class _UNetBase:
    config: ModelConfig
    seed: int

    def parameters(self) -> list[Tensor]:
        return list(self._store.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._store.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._store.params) ^ set(state)
        if missing:
            raise ValueError(f"state dict does not match model parameters: {sorted(missing)}")
        for name, t in self._store.params.items():
            arr = np.asarray(state[name], dtype=t.data.dtype)
            if arr.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()

    def _check_input(self, shape):
        h, w = shape[-2:]
        div = 2**self.config.levels
        if h % div or w % div:
            raise ValueError(f"input {h}x{w} not divisible by 2^levels = {div}")


class UNet(_UNetBase):
    """Real-valued U-Net mapping an RF speckle patch to an RF PSF."""

    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 0, dtype=np.float64):
        self.config = config
        self.seed = seed
        store = _ParamStore(seed, config.slope, dtype)
        self._store = store
        k = config.kernel
        ch = config.base_channels

        store.weight("stem.w", ch, 1, k)
        store.bias("stem.b", ch)
        c = ch
        for lvl in range(config.levels):
            store.weight(f"down{lvl}.w", 2 * c, c, k)
            store.bias(f"down{lvl}.b", 2 * c)
            store.weight(f"enc{lvl}.w", 2 * c, 2 * c, k)
            store.bias(f"enc{lvl}.b", 2 * c)
            c *= 2
        for lvl in reversed(range(config.levels)):
            store.weight(f"up{lvl}.w", c // 2, c, k)
            store.bias(f"up{lvl}.b", c // 2)
            store.weight(f"dec{lvl}.w", c // 2, c, k)
            store.bias(f"dec{lvl}.b", c // 2)
            c //= 2
        store.weight("head.w", 1, ch, k)
        store.bias("head.b", 1)

    def forward(self, x: Tensor) -> Tensor:
        self._check_input(x.data.shape)
        cfg = self.config
        p = self._store.params
        pad = cfg.kernel // 2
        act = lambda t: leaky_relu(t, cfg.slope)

        h = act(conv2d(x, p["stem.w"], p["stem.b"], 1, pad))
        skips = [h]
        for lvl in range(cfg.levels):
            h = act(conv2d(h, p[f"down{lvl}.w"], p[f"down{lvl}.b"], 2, pad))
            h = act(conv2d(h, p[f"enc{lvl}.w"], p[f"enc{lvl}.b"], 1, pad))
            if lvl < cfg.levels - 1:
                skips.append(h)
        for lvl in reversed(range(cfg.levels)):
            h = upsample2(h)
            h = act(conv2d(h, p[f"up{lvl}.w"], p[f"up{lvl}.b"], 1, pad))
            h = concat_channels(h, skips[lvl])
            h = act(conv2d(h, p[f"dec{lvl}.w"], p[f"dec{lvl}.b"], 1, pad))
        return conv2d(h, p["head.w"], p["head.b"], 1, pad)

    __call__ = forward


class ComplexUNet(_UNetBase):
    """Complex-valued U-Net mapping k-space speckle to a k-space PSF.

    Real and imaginary weight parts are initialized independently, each at
    1/sqrt(2) of the real-net scale so the complex magnitude matches.
    """

    def __init__(self, config: ModelConfig = ModelConfig(domain="kspace"), seed: int = 0, dtype=np.float64):
        self.config = config
        self.seed = seed
        store = _ParamStore(seed, config.slope, dtype)
        self._store = store
        k = config.kernel
        ch = config.base_channels
        inv_sqrt2 = 1.0 / np.sqrt(2.0)

        def cweight(name, cout, cin):
            store.weight(f"{name}.wr", cout, cin, k, scale=inv_sqrt2)
            store.weight(f"{name}.wi", cout, cin, k, scale=inv_sqrt2)
            store.bias(f"{name}.br", cout)
            store.bias(f"{name}.bi", cout)

        cweight("stem", ch, 1)
        c = ch
        for lvl in range(config.levels):
            cweight(f"down{lvl}", 2 * c, c)
            cweight(f"enc{lvl}", 2 * c, 2 * c)
            c *= 2
        for lvl in reversed(range(config.levels)):
            cweight(f"up{lvl}", c // 2, c)
            cweight(f"dec{lvl}", c // 2, c)
            c //= 2
        cweight("head", 1, ch)

    def _cconv(self, name: str, x: ComplexTensor, stride: int) -> ComplexTensor:
        p = self._store.params
        pad = self.config.kernel // 2
        return complex_conv2d(
            x, p[f"{name}.wr"], p[f"{name}.wi"], p[f"{name}.br"], p[f"{name}.bi"], stride, pad
        )

    def _act(self, x: ComplexTensor) -> ComplexTensor:
        # LeakyReLU acts on the real and imaginary channels separately.
        return ComplexTensor(leaky_relu(x.re, self.config.slope), leaky_relu(x.im, self.config.slope))

    def forward(self, x: ComplexTensor) -> ComplexTensor:
        self._check_input(x.re.data.shape)
        cfg = self.config

        h = self._act(self._cconv("stem", x, 1))
        skips = [h]
        for lvl in range(cfg.levels):
            h = self._act(self._cconv(f"down{lvl}", h, 2))
            h = self._act(self._cconv(f"enc{lvl}", h, 1))
            if lvl < cfg.levels - 1:
                skips.append(h)
        for lvl in reversed(range(cfg.levels)):
            h = ComplexTensor(upsample2(h.re), upsample2(h.im))
            h = self._act(self._cconv(f"up{lvl}", h, 1))
            skip = skips[lvl]
            h = ComplexTensor(concat_channels(h.re, skip.re), concat_channels(h.im, skip.im))
            h = self._act(self._cconv(f"dec{lvl}", h, 1))
        return self._cconv("head", h, 1)

    __call__ = forward


def build_model(domain: str, seed: int = 0, config: ModelConfig | None = None, dtype=np.float64):
    """Construct the network matching a training domain ('rf' or 'kspace')."""
    if config is None:
        config = ModelConfig(domain=domain)
    elif config.domain != domain:
        raise ValueError(f"config domain {config.domain!r} != requested {domain!r}")
    if domain == "rf":
        return UNet(config, seed, dtype)
    return ComplexUNet(config, seed, dtype)
