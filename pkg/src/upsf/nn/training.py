"""Training loop: on-the-fly speckle synthesis, checkpointing, diagnostics.

Each training step draws a fresh scatterer map from a seeded stream,
convolves it with the step's PSF to form the network input, and optimizes
one of the loss kinds. Every source of randomness derives from the single
``TrainConfig.seed``, so a rerun reproduces the final weights bit-exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..speckle import convolve_arrays
from ..sigproc import fft2c_array, ifft2c_array
from ..tensorfile import read_tensor, write_tensor
from .autodiff import ComplexTensor, NonFiniteError, Tensor
from .losses import LOSS_KINDS, loss
from .optim import Adam, lr_at_epoch
from .unet import ComplexUNet, ModelConfig, UNet, build_model

__all__ = [
    "TrainConfig",
    "TrainError",
    "train",
    "fit_single_pair",
    "estimate_psf",
    "save_checkpoint",
    "load_checkpoint",
]


class TrainError(RuntimeError):
    """Training aborted; the message carries step, lr, and loss kind."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr0: float = 1e-3
    decay: float = 0.1
    decay_every: int = 10  # epochs per learning-rate step
    batch_size: int = 1
    seed: int = 0
    loss: str = "l1_bmode"
    dynamic_range: float = 60.0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSS_KINDS}")
        if self.batch_size != 1:
            raise ValueError("only batch_size = 1 is supported")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")

    def lr(self, epoch: int) -> float:
        return lr_at_epoch(epoch, self.lr0, self.decay, self.decay_every)


def _normalize(arr: np.ndarray, what: str) -> np.ndarray:
    peak = np.max(np.abs(arr))
    if peak <= 0:
        raise ValueError(f"{what} is identically zero")
    return arr / peak


def _to_model_input(model, speckle: np.ndarray):
    x = _normalize(speckle, "speckle")[None]
    if isinstance(model, ComplexUNet):
        return ComplexTensor.from_array(fft2c_array(x))
    return Tensor(x)


def _to_model_target(model, psf: np.ndarray):
    y = _normalize(psf, "psf")[None]
    if isinstance(model, ComplexUNet):
        return ComplexTensor.from_array(fft2c_array(y))
    return Tensor(y)


def train(
    model,
    psfs: list[np.ndarray],
    cfg: TrainConfig,
    out_dir: str | None = None,
    record_every: int = 1,
) -> list[dict]:
    """Train ``model`` on a list of 2D PSF arrays; returns the loss curve.

    Scatterer maps are drawn per step from a stream seeded by
    ``(cfg.seed, 1)``; the per-epoch visit order is shuffled by a stream
    seeded by ``(cfg.seed, 2)``. A checkpoint is written per epoch when
    ``out_dir`` is given. A non-finite loss aborts with a diagnostic.
    """
    if not psfs:
        raise ValueError("empty PSF dataset")
    psfs = [np.asarray(p, dtype=np.float64) for p in psfs]
    shape = psfs[0].shape
    for p in psfs:
        if p.shape != shape:
            raise ValueError(f"inconsistent PSF shapes: {p.shape} vs {shape}")

    scat_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 1])))
    order_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 2])))
    opt = Adam(model.parameters())
    history: list[dict] = []

    step = 0
    for epoch in range(cfg.epochs):
        lr = cfg.lr(epoch)
        order = order_rng.permutation(len(psfs))
        for idx in order:
            psf = psfs[idx]
            scat = scat_rng.standard_normal(shape)
            speckle = convolve_arrays(scat, psf)
            try:
                pred = model(_to_model_input(model, speckle))
                target = _to_model_target(model, psf)
                value = loss(cfg.loss, pred, target, cfg.dynamic_range)
                loss_val = value.item()
                if not np.isfinite(loss_val):
                    raise NonFiniteError("loss value is not finite")
                opt.zero_grad()
                value.backward()
                opt.step(lr)
            except NonFiniteError as exc:
                raise TrainError(
                    f"non-finite values at step {step} (epoch {epoch}, lr {lr:g}, loss {cfg.loss}): {exc}"
                ) from exc
            if step % record_every == 0:
                history.append({"step": step, "epoch": epoch, "lr": lr, "loss": loss_val})
            step += 1
        if out_dir is not None:
            save_checkpoint(model, os.path.join(out_dir, f"ckpt_epoch_{epoch:03d}"))
    return history


def fit_single_pair(
    model,
    speckle: np.ndarray,
    psf: np.ndarray,
    loss_kind: str = "l1_bmode",
    steps: int = 2000,
    lr: float = 1e-3,
    dynamic_range: float = 60.0,
    stop_fn=None,
    check_every: int = 100,
) -> list[float]:
    """Overfit one fixed (speckle, psf) pair; returns per-step losses.

    ``stop_fn(step, model)`` is polled every ``check_every`` steps and may
    return True to stop early (e.g. once a target score is reached).
    """
    x = _to_model_input(model, np.asarray(speckle, dtype=np.float64))
    y = _to_model_target(model, np.asarray(psf, dtype=np.float64))
    opt = Adam(model.parameters())
    losses: list[float] = []
    for step in range(steps):
        pred = model(x)
        value = loss(loss_kind, pred, y, dynamic_range)
        opt.zero_grad()
        value.backward()
        opt.step(lr)
        losses.append(value.item())
        if stop_fn is not None and (step + 1) % check_every == 0 and stop_fn(step, model):
            break
    return losses


def estimate_psf(model, speckle: np.ndarray) -> np.ndarray:
    """Predict the RF PSF underlying a 2D speckle patch.

    For the k-space model the prediction is mapped back to the spatial
    domain (real part of the centered inverse FFT). The output is
    peak-normalized.
    """
    x = _to_model_input(model, np.asarray(speckle, dtype=np.float64))
    pred = model(x)
    if isinstance(model, ComplexUNet):
        rf = ifft2c_array(pred.to_array()[0]).real
    else:
        rf = pred.data[0]
    peak = np.max(np.abs(rf))
    return rf / peak if peak > 0 else rf


# ---------------------------------------------------------------------------
# Checkpoints: one tensor file per parameter plus a JSON manifest.
# ---------------------------------------------------------------------------


def save_checkpoint(model, ckpt_dir: str) -> None:
    os.makedirs(ckpt_dir, exist_ok=True)
    entries = {}
    for name, arr in model.state_dict().items():
        fname = name.replace("/", "_") + ".ut"
        write_tensor(os.path.join(ckpt_dir, fname), arr.astype(np.float32))
        entries[name] = {"file": fname, "shape": list(arr.shape)}
    manifest = {
        "kind": "complex_unet" if isinstance(model, ComplexUNet) else "unet",
        "seed": model.seed,
        "config": asdict(model.config),
        "params": entries,
    }
    with open(os.path.join(ckpt_dir, "weights.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_checkpoint(ckpt_dir: str, model=None):
    """Restore a model from a checkpoint directory.

    When ``model`` is None a fresh network is built from the stored config.
    """
    with open(os.path.join(ckpt_dir, "weights.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if model is None:
        config = ModelConfig(**manifest["config"])
        cls = ComplexUNet if manifest["kind"] == "complex_unet" else UNet
        model = cls(config, seed=manifest["seed"])
    state = {}
    for name, entry in manifest["params"].items():
        arr = read_tensor(os.path.join(ckpt_dir, entry["file"]))
        state[name] = arr.astype(np.float64)
    model.load_state_dict(state)
    return model
