"""Central finite-difference verification of autodiff gradients."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor

__all__ = ["numeric_gradient", "check_gradient"]


def numeric_gradient(fn, x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient of scalar ``fn`` at ``x``, elementwise."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = fn(x)
        flat[i] = orig - step
        f_minus = fn(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def check_gradient(build_fn, x0: np.ndarray, rtol: float = 1e-3, step: float | None = None) -> float:
    """Compare autodiff and finite-difference gradients of a scalar map.

    ``build_fn(t: Tensor) -> Tensor`` must return a scalar node. The step
    defaults to 1e-4 times the input scale. Returns the worst relative
    error; raises AssertionError when it exceeds ``rtol``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if step is None:
        step = 1e-4 * max(1.0, float(np.max(np.abs(x0))))

    t = Tensor(x0.copy(), requires_grad=True)
    out = build_fn(t)
    out.backward()
    analytic = t.grad.copy()

    def scalar_fn(arr):
        return build_fn(Tensor(arr.copy())).item()

    numeric = numeric_gradient(scalar_fn, x0.copy(), step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    rel = np.abs(analytic - numeric) / denom
    worst = float(rel.max())
    if worst > rtol:
        idx = np.unravel_index(int(np.argmax(rel)), rel.shape)
        raise AssertionError(
            f"gradient mismatch: rel err {worst:.3e} at {idx} "
            f"(analytic {analytic[idx]:.6e}, numeric {numeric[idx]:.6e})"
        )
    return worst
