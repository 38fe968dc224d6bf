import os

import numpy as np
import pytest

import upsf
from upsf.nn import (
    Adam,
    ComplexUNet,
    ModelConfig,
    Tensor,
    TrainConfig,
    TrainError,
    UNet,
    adam_step,
    build_model,
    estimate_psf,
    fit_single_pair,
    load_checkpoint,
    lr_at_epoch,
    save_checkpoint,
    train,
)


@pytest.fixture(scope="module")
def psf32():
    cfg = upsf.default_config()
    grid = upsf.grid_from_config(cfg, 32, 32)
    profile = upsf.generate_phase_screen(cfg, seed=2)
    return upsf.simulate_psf(cfg, profile, grid).data


def test_adam_zero_grad_leaves_params():
    params = [np.array([1.0, 2.0]), np.array([[3.0]])]
    grads = [np.zeros(2), np.zeros((1, 1))]
    state = {}
    adam_step(params, grads, state, lr=0.1)
    assert np.array_equal(params[0], [1.0, 2.0])
    assert np.array_equal(params[1], [[3.0]])
    assert state["t"] == 1


def test_adam_converges_on_scalar_quadratic():
    # minimize (x - 3)^2; closed-form minimum x = 3
    x = np.array([0.0])
    state = {}
    for _ in range(500):
        g = 2.0 * (x - 3.0)
        adam_step([x], [g], state, lr=0.05)
    assert abs(x[0] - 3.0) < 1e-3


def test_lr_schedule():
    assert lr_at_epoch(0) == pytest.approx(1e-3)
    assert lr_at_epoch(9) == pytest.approx(1e-3)
    assert lr_at_epoch(10) == pytest.approx(1e-4)
    assert lr_at_epoch(25) == pytest.approx(1e-5)
    cfg = TrainConfig(epochs=30)
    assert cfg.lr(10) == pytest.approx(1e-4)


def test_adam_class_matches_functional(rng):
    t = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
    ref = t.data.copy()
    g = rng.standard_normal((3, 3))

    opt = Adam([t])
    t.grad = g.copy()
    opt.step(1e-2)

    state = {}
    params = [ref]
    adam_step(params, [g.copy()], state, 1e-2)
    assert np.allclose(t.data, params[0], atol=1e-15)


def test_unet_shape_contract_and_divisibility(rng):
    model = UNet(ModelConfig(), seed=0)
    out = model(Tensor(rng.standard_normal((1, 64, 64))))
    assert out.data.shape == (1, 64, 64)
    assert np.all(np.isfinite(out.data))
    with pytest.raises(ValueError):
        model(Tensor(rng.standard_normal((1, 60, 60))))


def test_complex_unet_shape_contract(rng):
    from upsf.nn import ComplexTensor

    model = ComplexUNet(seed=0)
    z = ComplexTensor(Tensor(rng.standard_normal((1, 32, 32))), Tensor(rng.standard_normal((1, 32, 32))))
    out = model(z)
    assert out.re.data.shape == (1, 32, 32)
    assert out.im.data.shape == (1, 32, 32)


def test_build_model_dispatch():
    assert isinstance(build_model("rf", seed=1), UNet)
    assert isinstance(build_model("kspace", seed=1), ComplexUNet)
    with pytest.raises(ValueError):
        build_model("kspace", config=ModelConfig(domain="rf"))


def test_train_deterministic_same_seed(psf32):
    cfg = TrainConfig(epochs=2, seed=5, loss="l2")
    runs = []
    for _ in range(2):
        model = UNet(ModelConfig(), seed=5)
        train(model, [psf32, psf32 * 0.9 + 0.1 * psf32**2], cfg)
        runs.append(model.state_dict())
    for name in runs[0]:
        assert np.array_equal(runs[0][name], runs[1][name]), name


def test_train_records_history_and_lr(psf32):
    model = UNet(ModelConfig(), seed=1)
    cfg = TrainConfig(epochs=2, seed=1, loss="l2", decay_every=1, decay=0.1)
    history = train(model, [psf32], cfg)
    assert len(history) == 2
    assert history[0]["lr"] == pytest.approx(1e-3)
    assert history[1]["lr"] == pytest.approx(1e-4)
    assert all(np.isfinite(h["loss"]) for h in history)


def test_train_checkpoints_and_reload(psf32, tmp_path):
    model = UNet(ModelConfig(), seed=3)
    cfg = TrainConfig(epochs=2, seed=3, loss="l2")
    train(model, [psf32], cfg, out_dir=str(tmp_path))
    assert (tmp_path / "ckpt_epoch_000" / "weights.json").exists()
    assert (tmp_path / "ckpt_epoch_001" / "weights.json").exists()

    restored = load_checkpoint(str(tmp_path / "ckpt_epoch_001"))
    assert isinstance(restored, UNet)
    ref = model.state_dict()
    got = restored.state_dict()
    for name in ref:
        assert np.allclose(got[name], ref[name].astype(np.float32)), name


def test_checkpoint_roundtrip_complex(tmp_path):
    model = ComplexUNet(seed=7)
    save_checkpoint(model, str(tmp_path / "ck"))
    restored = load_checkpoint(str(tmp_path / "ck"))
    assert isinstance(restored, ComplexUNet)
    for name, arr in model.state_dict().items():
        assert np.allclose(restored.state_dict()[name], arr.astype(np.float32))


def test_train_aborts_on_nonfinite(psf32):
    model = UNet(ModelConfig(), seed=1)
    # an absurd learning rate reliably blows the optimization up
    cfg = TrainConfig(epochs=3, seed=1, loss="l2", lr0=1e12)
    with pytest.raises(TrainError, match="step"):
        train(model, [psf32], cfg)


def test_fit_single_pair_reduces_loss(psf32):
    from upsf.speckle import convolve_arrays

    rng = np.random.default_rng(0)
    speckle = convolve_arrays(rng.standard_normal(psf32.shape), psf32)
    model = UNet(ModelConfig(), seed=0)
    losses = fit_single_pair(model, speckle, psf32, loss_kind="l2", steps=60, lr=1e-3)
    assert losses[-1] < losses[0]


def test_estimate_psf_shapes(psf32):
    from upsf.speckle import convolve_arrays

    rng = np.random.default_rng(0)
    speckle = convolve_arrays(rng.standard_normal(psf32.shape), psf32)
    for domain in ("rf", "kspace"):
        model = build_model(domain, seed=0)
        pred = estimate_psf(model, speckle)
        assert pred.shape == psf32.shape
        assert np.max(np.abs(pred)) == pytest.approx(1.0)


def test_train_validates_inputs(psf32):
    model = UNet(ModelConfig(), seed=0)
    with pytest.raises(ValueError):
        train(model, [], TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        TrainConfig(epochs=1, loss="nope")
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=2)
