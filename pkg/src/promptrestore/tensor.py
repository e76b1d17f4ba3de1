"""Minimal dense-tensor library with tape-based reverse-mode autodiff.

Everything downstream (prompt pools, losses, the restoration backbone) is
built from the operations in this module. Design constraints:

- float64 everywhere; desk-scale problem sizes make precision cheap and keep
  finite-difference gradient checks tight.
- A single module-level tape records executed operations in order; execution
  order is a topological order, so ``backward`` is one reverse sweep that
  visits each recorded node exactly once.
- Gradients accumulate into ``.grad`` until explicitly reset; the training
  loop owns calling ``reset_tape()`` / ``zero_grad()`` between steps.
- ``dft2`` is a naive basis-matrix DFT, not an FFT; the literal double-sum
  oracle in the tests is the independent cross-check.
"""

from __future__ import annotations

import math
import warnings
from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf values."""


# ---------------------------------------------------------------------------
# tape

class Tape:
    """Ordered record of executed differentiable operations."""

    def __init__(self):
        self.nodes = []

    def __len__(self):
        return len(self.nodes)

    def clear(self):
        self.nodes.clear()


class _Node:
    __slots__ = ("op", "out", "inputs", "backward")

    def __init__(self, op, out, inputs, backward):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.backward = backward


_TAPE = Tape()
_GRAD_ENABLED = True
_FINITE_CHECKS = True
_SWEEP = None  # id(tensor) -> [tensor, grad] during an active backward sweep


def tape() -> Tape:
    return _TAPE


def reset_tape():
    """Drop all recorded operations. Leaf tensors and their grads survive."""
    _TAPE.clear()


@contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextmanager
def finite_checks(enabled: bool):
    global _FINITE_CHECKS
    prev = _FINITE_CHECKS
    _FINITE_CHECKS = enabled
    try:
        yield
    finally:
        _FINITE_CHECKS = prev


def _check_finite(arr: np.ndarray, op: str):
    if _FINITE_CHECKS and not np.isfinite(arr).all():
        raise NonFiniteError(f"operation '{op}' produced non-finite values")


# ---------------------------------------------------------------------------
# tensor

class Tensor:
    """Dense float64 array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        # np.asarray keeps 0-d scalars 0-d (ascontiguousarray would not)
        arr = np.asarray(data, dtype=np.float64, order="C")
        _check_finite(arr, "tensor")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- autodiff plumbing ---------------------------------------------------

    def _accumulate(self, g: np.ndarray):
        """Deposit gradient: into the active sweep, or straight into .grad."""
        if _SWEEP is not None:
            slot = _SWEEP.get(id(self))
            if slot is None:
                _SWEEP[id(self)] = [self, np.array(g, dtype=np.float64)]
            else:
                slot[1] = slot[1] + g
        else:
            if self.grad is None:
                self.grad = np.zeros_like(self.data)
            self.grad += g

    def backward(self):
        """Reverse sweep from this scalar: accumulates grads of all ancestors.

        Each call adds one fresh sweep's worth of gradient into ``.grad``;
        repeated calls without a reset therefore accumulate.
        """
        global _SWEEP
        if self.data.ndim != 0 and self.data.size != 1:
            raise ShapeError(
                f"backward() requires a scalar loss, got shape {self.shape}")
        if _SWEEP is not None:
            raise RuntimeError("nested backward() calls are not supported")
        _SWEEP = {id(self): [self, np.ones_like(self.data)]}
        try:
            for node in reversed(_TAPE.nodes):
                slot = _SWEEP.get(id(node.out))
                if slot is None:
                    continue
                node.backward(slot[1])
            sweep, _SWEEP = _SWEEP, None
        finally:
            _SWEEP = None
        for t, g in sweep.values():
            if t.requires_grad:
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += g

    # -- operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- method aliases -----------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def flatten(self):
        return reshape(self, -1)

    def transpose(self, axes=None):
        return transpose(self, axes)

    @property
    def T(self):
        return transpose(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _record(op: str, out_data: np.ndarray, inputs, backward) -> Tensor:
    """Wrap an op result; register it on the tape when gradients are live."""
    _check_finite(out_data, op)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.requires_grad = _GRAD_ENABLED and any(t.requires_grad for t in inputs)
    if out.requires_grad:
        _TAPE.nodes.append(_Node(op, out, inputs, backward))
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_check(a: np.ndarray, b: np.ndarray, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a.data, b.data, "add")
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _record("add", out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a.data, b.data, "sub")
    out = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _record("sub", out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a.data, b.data, "mul")
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _record("mul", out, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a.data, b.data, "div")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _record("div", out, (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _record("neg", -a.data, (a,), backward)


def maximum(a, c: float) -> Tensor:
    """Elementwise max with a scalar; the hinge-clamp building block.

    Subgradient at the kink: d/dx max(x, c) = 1 for x > c, else 0.
    """
    a = _as_tensor(a)
    c = float(c)
    out = np.maximum(a.data, c)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > c))

    return _record("maximum", out, (a,), backward)


def tabs(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * np.sign(a.data))

    return _record("abs", np.abs(a.data), (a,), backward)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out)

    return _record("exp", out, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _record("log", out, (a,), backward)


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / (2.0 * out))

    return _record("sqrt", out, (a,), backward)


def xlogx(a) -> Tensor:
    """Elementwise x*log(x) with the entropy convention 0*log(0) = 0."""
    a = _as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a.data > 0, a.data * np.log(np.maximum(a.data, 1e-300)), 0.0)

    def backward(g):
        if a.requires_grad:
            with np.errstate(divide="ignore", invalid="ignore"):
                d = np.where(a.data > 0, np.log(np.maximum(a.data, 1e-300)) + 1.0, 0.0)
            a._accumulate(g * d)

    return _record("xlogx", out, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out * (1.0 - out))

    return _record("sigmoid", out, (a,), backward)


def silu(a) -> Tensor:
    """x * sigmoid(x): smooth ReLU-like activation, C-infinity everywhere.

    Chosen over ReLU so finite-difference gradient checks never straddle a
    derivative kink.
    """
    a = _as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * s

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * s * (1.0 + a.data * (1.0 - s)))

    return _record("silu", out, (a,), backward)


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions differ: {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _record("matmul", out, (a, b), backward)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape).copy()
                          if np.ndim(g) == 0 else np.full(a.shape, g))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg, a.shape).copy())

    return _record("sum", np.asarray(out), (a,), backward)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.size // out.size

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.full(a.shape, g / count))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg / count, a.shape).copy())

    return _record("mean", np.asarray(out), (a,), backward)


def reshape(a, *shape) -> Tensor:
    a = _as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(
            f"cannot reshape {a.shape} ({a.size} elements) to {shape}") from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.shape))

    return _record("reshape", np.ascontiguousarray(out), (a,), backward)


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.transpose(g, inv))

    return _record("transpose", np.ascontiguousarray(out), (a,), backward)


def concat(tensors, axis=0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return _record("concat", out, tuple(tensors), backward)


def stack(tensors) -> Tensor:
    """Stack same-shape tensors along a new leading axis."""
    return concat([reshape(t, (1,) + t.shape) for t in tensors], axis=0)


def take(a, indices, axis=0) -> Tensor:
    """Gather rows along axis 0; gradients scatter-add back."""
    a = _as_tensor(a)
    if axis != 0:
        raise ShapeError("take supports axis=0 only")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise IndexError(
            f"take indices out of range [0, {a.shape[0]}): {indices}")
    out = a.data[idx]

    def backward(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            np.add.at(acc, idx, g)
            a._accumulate(acc)

    return _record("take", out, (a,), backward)


# ---------------------------------------------------------------------------
# softmax / cosine

def softmax(x, temperature: float = 1.0, axis: int = -1) -> Tensor:
    """Stable softmax of x / temperature along ``axis`` (max-subtraction)."""
    if temperature <= 0:
        raise ValueError(f"softmax temperature must be > 0, got {temperature}")
    x = _as_tensor(x)
    z = x.data / temperature
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            inner = (g * p).sum(axis=axis, keepdims=True)
            x._accumulate(p * (g - inner) / temperature)

    return _record("softmax", p, (x,), backward)


def cosine_similarity(a, b) -> Tensor:
    """Cosine of two same-length vectors as a scalar tensor.

    A zero-norm operand yields 0 (with a RuntimeWarning) instead of a
    division error: degenerate features early in training must not abort a
    step. The zero branch carries no gradient.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(
            f"cosine_similarity shapes differ: {a.shape} vs {b.shape}")
    if float(np.linalg.norm(a.data)) == 0.0 or float(np.linalg.norm(b.data)) == 0.0:
        warnings.warn("cosine_similarity: zero-norm input, returning 0",
                      RuntimeWarning, stacklevel=2)
        return Tensor(0.0)
    af, bf = a.flatten(), b.flatten()
    dot = tsum(mul(af, bf))
    na = sqrt(tsum(mul(af, af)))
    nb = sqrt(tsum(mul(bf, bf)))
    return div(dot, mul(na, nb))


# ---------------------------------------------------------------------------
# 2-D discrete Fourier transform (naive basis-matrix form, not FFT)

_DFT_BASES: dict = {}


def _dft_basis(n: int):
    if n not in _DFT_BASES:
        k = np.arange(n)
        ang = 2.0 * math.pi * np.outer(k, k) / n
        _DFT_BASES[n] = (np.cos(ang), np.sin(ang))
    return _DFT_BASES[n]


def dft2(img) -> tuple:
    """Unnormalized 2-D DFT: X[u,v] = sum img[x,y] exp(-2*pi*i(ux/h + vy/w)).

    Returns (real, imag) tensors of the input's shape. A leading channel
    axis is transformed per channel. Differentiable with respect to the
    image because the transform is two fixed-basis matrix products.
    """
    img = _as_tensor(img)
    if img.ndim == 3:
        parts = [dft2(reshape(take(img, [c]), img.shape[1:]))
                 for c in range(img.shape[0])]
        re = stack([p[0] for p in parts])
        im = stack([p[1] for p in parts])
        return re, im
    if img.ndim != 2:
        raise ShapeError(f"dft2 expects [h,w] or [c,h,w], got {img.shape}")
    h, w = img.shape
    ch, sh = _dft_basis(h)
    cw, sw = _dft_basis(w)
    Ch, Sh = Tensor(ch), Tensor(sh)
    CwT, SwT = Tensor(cw.T), Tensor(sw.T)
    re = sub(matmul(matmul(Ch, img), CwT), matmul(matmul(Sh, img), SwT))
    im = neg(add(matmul(matmul(Sh, img), CwT), matmul(matmul(Ch, img), SwT)))
    return re, im


# ---------------------------------------------------------------------------
# convolution / resampling (the backbone's spatial primitives)

def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution (cross-correlation) over a batched image tensor.

    x: [B, C, H, W], w: [O, C, kh, kw], b: [O] or None. Forward is an
    im2col + matmul; backward scatters column gradients back with the
    standard nine-slice accumulation.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d expects x[B,C,H,W], w[O,C,kh,kw]; "
                         f"got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d channel mismatch: input has {x.shape[1]}, "
                         f"kernel expects {w.shape[1]}")
    bt = None if b is None else _as_tensor(b)
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    xp = (np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
          if padding else x.data)
    Ho = (xp.shape[2] - kh) // stride + 1
    Wo = (xp.shape[3] - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]                    # [B,C,Ho,Wo,kh,kw]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))
    cols = cols.reshape(B * Ho * Wo, C * kh * kw)
    wmat = w.data.reshape(O, C * kh * kw).T
    out = cols @ wmat                                       # [B*Ho*Wo, O]
    if bt is not None:
        out = out + bt.data
    out = out.reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2)

    def backward(g):
        gm = g.transpose(0, 2, 3, 1).reshape(B * Ho * Wo, O)
        if w.requires_grad:
            w._accumulate((cols.T @ gm).T.reshape(w.shape))
        if bt is not None and bt.requires_grad:
            bt._accumulate(gm.sum(axis=0))
        if x.requires_grad:
            dcols = gm @ wmat.T
            dcols = dcols.reshape(B, Ho, Wo, C, kh, kw)
            dxp = np.zeros(xp.shape)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + stride * Ho:stride,
                        j:j + stride * Wo:stride] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            if padding:
                dxp = dxp[:, :, padding:-padding, padding:-padding]
            x._accumulate(dxp)

    inputs = (x, w) if bt is None else (x, w, bt)
    return _record("conv2d", np.ascontiguousarray(out), inputs, backward)


def upsample_nearest2(x) -> Tensor:
    """Nearest-neighbor 2x spatial upsampling of [B, C, H, W]."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"upsample_nearest2 expects [B,C,H,W], got {x.shape}")
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(g):
        if x.requires_grad:
            B, C, H2, W2 = g.shape
            x._accumulate(
                g.reshape(B, C, H2 // 2, 2, W2 // 2, 2).sum(axis=(3, 5)))

    return _record("upsample_nearest2", out, (x,), backward)


# ---------------------------------------------------------------------------
# finite differences (the independent gradient oracle)

def finite_diff_grad(f, x: Tensor, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient estimate of scalar f at x, per element.

    f receives a plain (non-recording) Tensor and must return a float or a
    scalar tensor. Runs with the tape disabled so probing never pollutes
    recorded state.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    base = x.data
    grad = np.zeros_like(base)
    flat = grad.reshape(-1)

    def evaluate(arr):
        with no_grad():
            r = f(Tensor(arr))
        return r.item() if isinstance(r, Tensor) else float(r)

    for i in range(base.size):
        pert = base.copy().reshape(-1)
        pert[i] += eps
        hi = evaluate(pert.reshape(base.shape))
        pert[i] -= 2 * eps
        lo = evaluate(pert.reshape(base.shape))
        flat[i] = (hi - lo) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-case relative error, max(|a|,|n|,1e-8) in the denominator."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


# ---------------------------------------------------------------------------
# construction helpers

def zeros(*shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(*shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=requires_grad)


def randn(rng: np.random.Generator, *shape, std: float = 1.0,
          requires_grad: bool = False) -> Tensor:
    return Tensor(std * rng.standard_normal(shape), requires_grad=requires_grad)
