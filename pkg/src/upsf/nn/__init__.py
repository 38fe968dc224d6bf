"""Minimal autodiff, desk-scale U-Nets, losses, and the training loop."""

from .autodiff import (
    ComplexTensor,
    NonFiniteError,
    Tensor,
    concat_channels,
    conv2d,
    hilbert_rows,
    ifft2_centered_pair,
    leaky_relu,
    upsample2,
)
from .gradcheck import check_gradient, numeric_gradient
from .losses import (
    LOSS_KINDS,
    FeaturePyramid,
    bmode_chain,
    bmode_chain_kspace,
    l1_loss,
    l2_loss,
    loss,
    ssim_loss,
)
from .optim import Adam, adam_step, lr_at_epoch
from .training import (
    TrainConfig,
    TrainError,
    estimate_psf,
    fit_single_pair,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .unet import ComplexUNet, ModelConfig, UNet, build_model, complex_conv2d

__all__ = [
    "Tensor",
    "ComplexTensor",
    "NonFiniteError",
    "conv2d",
    "complex_conv2d",
    "leaky_relu",
    "upsample2",
    "concat_channels",
    "hilbert_rows",
    "ifft2_centered_pair",
    "check_gradient",
    "numeric_gradient",
    "LOSS_KINDS",
    "FeaturePyramid",
    "bmode_chain",
    "bmode_chain_kspace",
    "l1_loss",
    "l2_loss",
    "ssim_loss",
    "loss",
    "Adam",
    "adam_step",
    "lr_at_epoch",
    "ModelConfig",
    "UNet",
    "ComplexUNet",
    "build_model",
    "TrainConfig",
    "TrainError",
    "train",
    "fit_single_pair",
    "estimate_psf",
    "save_checkpoint",
    "load_checkpoint",
]
