import numpy as np
import pytest

from upsf.nn import (
    ComplexTensor,
    LOSS_KINDS,
    Tensor,
    bmode_chain,
    bmode_chain_kspace,
    check_gradient,
    loss,
)
from upsf.sigproc import fft2c_array


@pytest.fixture()
def nprng():
    return np.random.default_rng(99)


def _as_domain(arr, domain):
    if domain == "kspace":
        return ComplexTensor.from_array(fft2c_array(arr)[None])
    return Tensor(arr[None])


def test_bmode_chain_range_and_peak(nprng, psf0_64):
    db = bmode_chain(Tensor(psf0_64.data[None]))
    assert db.data.max() == pytest.approx(60.0, abs=1e-9)
    assert db.data.min() >= 0.0


def test_bmode_chain_matches_sigproc_chain(psf0_64):
    import upsf

    db_nn = bmode_chain(Tensor(psf0_64.data[None])).data[0]
    db_ref = upsf.bmode(psf0_64).data
    # identical up to the delta-smoothed magnitude at floor level
    assert np.max(np.abs(db_nn - db_ref)) < 0.01


def test_bmode_chain_scale_invariance(nprng):
    y = nprng.standard_normal((1, 16, 16))
    a = bmode_chain(Tensor(y))
    b = bmode_chain(Tensor(y * 1234.5))
    assert np.max(np.abs(a.data - b.data)) < 1e-6


def test_bmode_chain_rejects_zero():
    with pytest.raises(ValueError):
        bmode_chain(Tensor(np.zeros((1, 8, 8))))


def test_kspace_chain_equals_rf_chain_on_spectrum(nprng, psf0_64):
    y = psf0_64.data
    z = ComplexTensor.from_array(fft2c_array(y)[None])
    db_k = bmode_chain_kspace(z)
    db_rf = bmode_chain(Tensor(y[None]))
    rms = np.sqrt(np.mean((db_k.data - db_rf.data) ** 2))
    assert rms < 1e-4


def test_losses_vanish_on_identity(nprng):
    y = nprng.standard_normal((16, 16))
    for domain in ("rf", "kspace"):
        target = _as_domain(y, domain)
        pred = _as_domain(y.copy(), domain)
        for kind in ("l1", "l2", "ssim", "feature"):
            val = loss(kind, pred, target).item()
            assert val == pytest.approx(0.0, abs=1e-12), (kind, domain)


def test_l2_hand_case():
    a = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    b = Tensor(np.array([[[2.0, 2.0], [1.0, 0.0]]]))
    val = loss("l2", a, b).item()
    assert val == pytest.approx((1 + 0 + 4 + 16) / 4.0)
    val1 = loss("l1", a, b).item()
    assert val1 == pytest.approx((1 + 0 + 2 + 4) / 4.0)


def test_unknown_loss_kind(nprng):
    y = Tensor(nprng.standard_normal((1, 8, 8)))
    with pytest.raises(ValueError):
        loss("huber", y, y)


def test_domain_mismatch_rejected(nprng):
    y = nprng.standard_normal((8, 8))
    with pytest.raises(ValueError):
        loss("l1", Tensor(y[None]), ComplexTensor.from_array(y[None].astype(complex)))


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_loss_gradients_rf(kind, nprng):
    y_target = nprng.standard_normal((8, 8))
    target = Tensor(y_target[None])
    x0 = nprng.standard_normal((1, 8, 8))
    err = check_gradient(lambda t: loss(kind, t, target), x0)
    assert err <= 1e-3, (kind, err)


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_loss_gradients_kspace(kind, nprng):
    target = ComplexTensor.from_array(fft2c_array(nprng.standard_normal((8, 8)))[None])
    re0 = nprng.standard_normal((1, 8, 8))
    im = Tensor(nprng.standard_normal((1, 8, 8)))

    def f(t):
        return loss(kind, ComplexTensor(t, im), target)

    err = check_gradient(f, re0)
    assert err <= 1e-3, (kind, err)
