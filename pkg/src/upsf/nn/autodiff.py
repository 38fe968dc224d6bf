"""Minimal reverse-mode autodiff on numpy arrays.

Tensors hold (channels, height, width) arrays or scalars. Every operation
validates that its result is finite; a NaN or inf anywhere trips a
:class:`NonFiniteError` naming the operation, which the training loop
converts into a step-level diagnostic.

Gradients follow the usual conventions: reductions broadcast, ``max``
routes to the first argmax, ``clamp`` passes gradient strictly inside the
interval, and the FFT-based linear operators backpropagate through their
adjoints.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "NonFiniteError",
    "Tensor",
    "ComplexTensor",
    "conv2d",
    "leaky_relu",
    "upsample2",
    "concat_channels",
    "hilbert_rows",
    "ifft2_centered_pair",
]


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or inf values."""


def _check_finite(data: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by {op}")
    return data


class Tensor:
    """A value node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents, backward, op: str) -> "Tensor":
        out = Tensor(_check_finite(data, op))
        grad_parents = tuple(p for p in parents if p.requires_grad)
        if grad_parents:
            out.requires_grad = True
            out._parents = grad_parents
            out._backward = backward
        return out

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self):
        """Backpropagate from a scalar node."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- helpers -------------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    @staticmethod
    def _wrap(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))

    # -- elementwise arithmetic ----------------------------------------------

    def __add__(self, other):
        other = Tensor._wrap(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_reduce_to(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to(g, b.data.shape))

        return Tensor._make(a.data + b.data, (a, b), backward, "add")

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(g):
            a._accumulate(-g)

        return Tensor._make(-a.data, (a,), backward, "neg")

    def __sub__(self, other):
        return self + (-Tensor._wrap(other))

    def __rsub__(self, other):
        return Tensor._wrap(other) + (-self)

    def __mul__(self, other):
        other = Tensor._wrap(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_reduce_to(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to(g * a.data, b.data.shape))

        return Tensor._make(a.data * b.data, (a, b), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._wrap(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_reduce_to(g / b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_reduce_to(-g * a.data / (b.data * b.data), b.data.shape))

        return Tensor._make(a.data / b.data, (a, b), backward, "div")

    # -- reductions ------------------------------------------------------------

    def sum(self) -> "Tensor":
        a = self

        def backward(g):
            a._accumulate(np.broadcast_to(g, a.data.shape))

        return Tensor._make(np.asarray(a.data.sum()), (a,), backward, "sum")

    def mean(self) -> "Tensor":
        a = self
        n = a.data.size

        def backward(g):
            a._accumulate(np.broadcast_to(g / n, a.data.shape))

        return Tensor._make(np.asarray(a.data.mean()), (a,), backward, "mean")

    def max(self) -> "Tensor":
        a = self
        idx = np.unravel_index(int(np.argmax(a.data)), a.data.shape)

        def backward(g):
            ga = np.zeros_like(a.data)
            ga[idx] = g
            a._accumulate(ga)

        return Tensor._make(np.asarray(a.data.max()), (a,), backward, "max")

    # -- elementwise nonlinearities ---------------------------------------------

    def abs(self) -> "Tensor":
        a = self
        sign = np.sign(a.data)

        def backward(g):
            a._accumulate(g * sign)

        return Tensor._make(np.abs(a.data), (a,), backward, "abs")

    def sqrt(self) -> "Tensor":
        a = self
        if np.any(a.data < 0):
            raise ValueError("sqrt of negative values")
        root = np.sqrt(a.data)

        def backward(g):
            a._accumulate(g * (0.5 / root))

        return Tensor._make(root, (a,), backward, "sqrt")

    def log10(self) -> "Tensor":
        a = self
        if np.any(a.data <= 0):
            raise ValueError("log10 of non-positive values")
        scale = 1.0 / math.log(10.0)

        def backward(g):
            a._accumulate(g * (scale / a.data))

        return Tensor._make(np.log10(a.data), (a,), backward, "log10")

    def clamp(self, lo: float, hi: float) -> "Tensor":
        a = self
        inside = (a.data > lo) & (a.data < hi)

        def backward(g):
            a._accumulate(g * inside)

        return Tensor._make(np.clip(a.data, lo, hi), (a,), backward, "clamp")


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape`` (scalar or identical)."""
    shape = tuple(shape)
    if g.shape == shape:
        return g
    if shape in ((), (1,)):
        return np.asarray(g.sum()).reshape(shape)
    raise ValueError(f"unsupported broadcast: gradient {g.shape} for operand {shape}")


class ComplexTensor:
    """Complex values as a (real, imag) pair of Tensors of equal shape."""

    __slots__ = ("re", "im")

    def __init__(self, re: Tensor, im: Tensor):
        if re.data.shape != im.data.shape:
            raise ValueError(f"real/imag shape mismatch: {re.data.shape} vs {im.data.shape}")
        self.re = re
        self.im = im

    @classmethod
    def from_array(cls, z: np.ndarray, requires_grad: bool = False) -> "ComplexTensor":
        return cls(
            Tensor(np.ascontiguousarray(z.real), requires_grad),
            Tensor(np.ascontiguousarray(z.imag), requires_grad),
        )

    @property
    def shape(self):
        return self.re.data.shape

    def to_array(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data


# ---------------------------------------------------------------------------
# Convolution and shape ops
# ---------------------------------------------------------------------------


def _im2col(xp: np.ndarray, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    c = xp.shape[0]
    cols = np.empty((c, k, k, oh, ow), dtype=xp.dtype)
    for u in range(k):
        for v in range(k):
            cols[:, u, v] = xp[:, u : u + stride * oh : stride, v : v + stride * ow : stride]
    return cols.reshape(c * k * k, oh * ow)


def _col2im(dcols: np.ndarray, c: int, k: int, stride: int, oh: int, ow: int, ph: int, pw: int) -> np.ndarray:
    dxp = np.zeros((c, ph, pw), dtype=dcols.dtype)
    dcols = dcols.reshape(c, k, k, oh, ow)
    for u in range(k):
        for v in range(k):
            dxp[:, u : u + stride * oh : stride, v : v + stride * ow : stride] += dcols[:, u, v]
    return dxp


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 1) -> Tensor:
    """2D convolution (cross-correlation) of (C,H,W) with (O,C,k,k) weights."""
    cin, h, wd = x.data.shape
    cout, cin_w, k, k2 = w.data.shape
    if k != k2:
        raise ValueError(f"kernel must be square, got {k}x{k2}")
    if cin != cin_w:
        raise ValueError(f"channel mismatch: input has {cin}, weights expect {cin_w}")
    if b is not None and b.data.shape != (cout,):
        raise ValueError(f"bias shape {b.data.shape} does not match {cout} output channels")

    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"kernel {k} with pad {pad} does not fit input {h}x{wd}")

    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad))) if pad else x.data
    cols = _im2col(xp, k, stride, oh, ow)
    w_mat = w.data.reshape(cout, cin * k * k)
    out = (w_mat @ cols).reshape(cout, oh, ow)
    if b is not None:
        out = out + b.data[:, None, None]

    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        g_mat = g.reshape(cout, oh * ow)
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(1, 2)))
        if w.requires_grad:
            w._accumulate((g_mat @ cols.T).reshape(w.data.shape))
        if x.requires_grad:
            dcols = w_mat.T @ g_mat
            dxp = _col2im(dcols, cin, k, stride, oh, ow, h + 2 * pad, wd + 2 * pad)
            x._accumulate(dxp[:, pad : pad + h, pad : pad + wd] if pad else dxp)

    return Tensor._make(out, parents, backward, "conv2d")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    a = x
    factor = np.where(a.data > 0, 1.0, slope)

    def backward(g):
        a._accumulate(g * factor)

    return Tensor._make(a.data * factor, (a,), backward, "leaky_relu")


def upsample2(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling of (C,H,W)."""
    a = x
    c, h, w = a.data.shape

    def backward(g):
        a._accumulate(g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)))

    out = np.repeat(np.repeat(a.data, 2, axis=1), 2, axis=2)
    return Tensor._make(out, (a,), backward, "upsample2")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1:] != b.data.shape[1:]:
        raise ValueError(f"spatial mismatch: {a.data.shape} vs {b.data.shape}")
    ca = a.data.shape[0]

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[:ca])
        if b.requires_grad:
            b._accumulate(g[ca:])

    return Tensor._make(np.concatenate([a.data, b.data], axis=0), (a, b), backward, "concat")


# ---------------------------------------------------------------------------
# FFT-based linear operators
# ---------------------------------------------------------------------------


def _hilbert_sign(n: int) -> np.ndarray:
    """Frequency-domain sign function: +1 positive, -1 negative, 0 at DC/Nyquist."""
    s = np.zeros(n)
    if n % 2 == 0:
        s[1 : n // 2] = 1.0
        s[n // 2 + 1 :] = -1.0
    else:
        s[1 : (n + 1) // 2] = 1.0
        s[(n + 1) // 2 :] = -1.0
    return s


def _hilbert_rows_raw(data: np.ndarray) -> np.ndarray:
    n = data.shape[1]
    mult = (-1j) * _hilbert_sign(n)
    spec = np.fft.fft(data, axis=1) * mult[None, :, None]
    return np.fft.ifft(spec, axis=1).real


def hilbert_rows(x: Tensor) -> Tensor:
    """Hilbert transform along the axial (row) axis of (C,H,W).

    The analytic signal is ``x + i * hilbert_rows(x)``. The operator is
    real and antisymmetric, so its adjoint is its negation.
    """
    a = x

    def backward(g):
        a._accumulate(-_hilbert_rows_raw(g.astype(a.data.dtype)))

    return Tensor._make(_hilbert_rows_raw(a.data), (a,), backward, "hilbert_rows")


def _ifft2c(z: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(z, axes=(1, 2)), axes=(1, 2), norm="ortho"), axes=(1, 2))


def _fft2c(z: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(z, axes=(1, 2)), axes=(1, 2), norm="ortho"), axes=(1, 2))


def ifft2_centered_pair(z: ComplexTensor) -> ComplexTensor:
    """Differentiable centered orthonormal inverse 2D FFT of (C,H,W) pairs.

    The transform is unitary, so the backward pass applies the forward
    centered FFT to the output cotangent.
    """
    re, im = z.re, z.im
    w = _ifft2c(re.data + 1j * im.data)

    def backward_re(g):
        adj = _fft2c(g.astype(np.complex128))
        if re.requires_grad:
            re._accumulate(adj.real)
        if im.requires_grad:
            im._accumulate(adj.imag)

    def backward_im(g):
        adj = _fft2c(1j * g.astype(np.complex128))
        if re.requires_grad:
            re._accumulate(adj.real)
        if im.requires_grad:
            im._accumulate(adj.imag)

    out_re = Tensor._make(np.ascontiguousarray(w.real), (re, im), backward_re, "ifft2c.re")
    out_im = Tensor._make(np.ascontiguousarray(w.imag), (re, im), backward_im, "ifft2c.im")
    return ComplexTensor(out_re, out_im)
