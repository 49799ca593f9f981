"""Dense tensors with reverse-mode autodiff for every operation the network needs.

Design notes
------------
- A ``Tensor`` wraps a contiguous row-major numpy array plus an optional
  gradient buffer of identical shape. Operations record a backward closure
  while gradients are enabled and any input requires them; ``backward`` walks
  the recorded graph in reverse topological order.
- float32 is the working precision. Gradient checking needs more headroom
  than float32 offers, so every op also runs in float64 ("wide" mode) simply
  by feeding float64 tensors through it.
- Convolutions are im2col + one BLAS matmul; the patch gather/scatter lives
  in :mod:`lytnet.kernels` (compiled extension with a numpy fallback).
"""

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from . import kernels

DEFAULT_DTYPE = np.float32
_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Operand shapes are inconsistent with each other or with a descriptor."""


class GraphError(RuntimeError):
    """Autodiff graph misuse, e.g. backward before any forward was recorded."""


_grad_enabled = [True]


@contextmanager
def no_grad():
    """Disable graph recording (inference / benchmarking)."""
    _grad_enabled.append(False)
    try:
        yield
    finally:
        _grad_enabled.pop()


def grad_enabled():
    return _grad_enabled[-1]


class Tensor:
    """Dense N-dimensional array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype in _FLOAT_DTYPES:
                dtype = data.dtype
            else:
                dtype = DEFAULT_DTYPE
        self.data = np.ascontiguousarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, upstream=None):
        """Backpropagate from this tensor through the recorded graph.

        ``upstream`` defaults to ones (i.e. 1.0 for a scalar loss). Raises
        :class:`GraphError` if no forward pass was recorded into this tensor.
        """
        if self._backward is None:
            raise GraphError(
                "backward before forward: this tensor has no recorded operation graph"
            )
        if upstream is None:
            upstream = np.ones_like(self.data)
        else:
            upstream = np.asarray(upstream, dtype=self.data.dtype)
            if upstream.shape != self.data.shape:
                raise ShapeError(
                    f"upstream gradient shape {upstream.shape} != tensor shape {self.data.shape}"
                )
        # iterative postorder over op nodes; leaves only receive accumulations
        topo = []
        visited = {id(self)}
        stack = [(self, iter(self._parents))]
        while stack:
            node, it = stack[-1]
            advanced = False
            for parent in it:
                if id(parent) not in visited and parent._backward is not None:
                    visited.add(id(parent))
                    stack.append((parent, iter(parent._parents)))
                    advanced = True
                    break
            if not advanced:
                topo.append(node)
                stack.pop()
        self.grad = upstream.copy() if self.grad is None else self.grad + upstream
        for node in reversed(topo):
            node._backward()

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # minimal operator surface, enough to compose losses and residuals
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -other if isinstance(other, Tensor) else -other)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make_op(data, parents, backward_fn):
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn(out)
    return out


# ---------------------------------------------------------------------------
# multiply-accumulate counting
# ---------------------------------------------------------------------------

class MacCounter:
    """Accumulates multiply-accumulates actually issued by conv/FC forwards."""

    def __init__(self):
        self.total = 0
        self.per_op = []

    def record(self, kind, macs):
        self.total += macs
        self.per_op.append((kind, macs))


_mac_counters: list = []


@contextmanager
def count_macs():
    counter = MacCounter()
    _mac_counters.append(counter)
    try:
        yield counter
    finally:
        _mac_counters.pop()


def _record_macs(kind, macs):
    for counter in _mac_counters:
        counter.record(kind, macs)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

CONV_MODES = ("standard", "depthwise", "pointwise")


@dataclass(frozen=True)
class ConvDescriptor:
    """Static description of a 2-D convolution.

    ``padding`` is per spatial axis (height, width); an int applies to both.
    pointwise forces kernel_size == 1 and depthwise forces out == in channels.
    """

    kernel_size: int
    stride: int
    padding: tuple
    in_channels: int
    out_channels: int
    mode: str = "standard"

    def __post_init__(self):
        if self.mode not in CONV_MODES:
            raise ValueError(f"unknown conv mode {self.mode!r}; expected one of {CONV_MODES}")
        pad = self.padding
        if isinstance(pad, int):
            pad = (pad, pad)
        pad = tuple(int(p) for p in pad)
        if len(pad) != 2 or any(p < 0 for p in pad):
            raise ValueError(f"padding must be two non-negative extents, got {self.padding!r}")
        object.__setattr__(self, "padding", pad)
        if self.kernel_size < 1 or self.stride < 1:
            raise ValueError("kernel_size and stride must be positive")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.mode == "pointwise" and self.kernel_size != 1:
            raise ValueError(f"pointwise convolution forces kernel_size=1, got {self.kernel_size}")
        if self.mode == "depthwise" and self.out_channels != self.in_channels:
            raise ValueError(
                f"depthwise convolution forces out_channels == in_channels, "
                f"got {self.out_channels} != {self.in_channels}"
            )

    @property
    def weight_shape(self):
        k = self.kernel_size
        if self.mode == "depthwise":
            return (self.in_channels, 1, k, k)
        return (self.out_channels, self.in_channels, k, k)


def _pad_input(x, ph, pw):
    if ph == 0 and pw == 0:
        return x
    n, c, h, w = x.shape
    xpad = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
    xpad[:, :, ph:ph + h, pw:pw + w] = x
    return xpad


def _gather_cols(xpad, k, stride, oh, ow):
    n, c = xpad.shape[:2]
    out = np.empty((n, c, k * k, oh * ow), dtype=xpad.dtype)
    kernels.active().im2col(xpad, k, stride, oh, ow, out)
    return out


def _scatter_cols(cols, k, stride, oh, ow, padded_shape):
    xpad = np.zeros(padded_shape, dtype=cols.dtype)
    kernels.active().col2im(np.ascontiguousarray(cols), k, stride, oh, ow, xpad)
    return xpad


def conv2d(x: Tensor, weights: Tensor, desc: ConvDescriptor) -> Tensor:
    """2-D convolution. Output extent = floor((in + 2*pad - k)/stride) + 1.

    standard: full cross-channel convolution; depthwise: one filter per
    channel; pointwise: 1x1 standard convolution.
    """
    x = _as_tensor(x)
    weights = _as_tensor(weights)
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects (N,C,H,W) input, got shape {x.shape}")
    if weights.shape != desc.weight_shape:
        raise ShapeError(
            f"weights shape {weights.shape} does not match descriptor {desc} "
            f"(expected {desc.weight_shape})"
        )
    n, c, h, w = x.shape
    if c != desc.in_channels:
        raise ShapeError(
            f"input has {c} channels but descriptor declares in_channels={desc.in_channels}"
        )
    k, s = desc.kernel_size, desc.stride
    ph, pw = desc.padding
    oh = (h + 2 * ph - k) // s + 1
    ow = (w + 2 * pw - k) // s + 1
    if h + 2 * ph < k or w + 2 * pw < k:
        raise ShapeError(
            f"input {h}x{w} with padding {desc.padding} admits no {k}x{k} kernel placement"
        )
    wdat = weights.data
    L = oh * ow

    if desc.mode == "pointwise" and s == 1 and ph == 0 and pw == 0:
        # 1x1 fast path: skip the patch gather entirely
        x2 = x.data.reshape(n, c, L)
        w2 = wdat.reshape(desc.out_channels, c)
        out = np.matmul(w2, x2)
        _record_macs("conv_pointwise", n * desc.out_channels * c * L)

        def backward(o):
            def _bw():
                g = o.grad.reshape(n, desc.out_channels, L)
                if weights.requires_grad:
                    gw = np.matmul(g, x2.transpose(0, 2, 1)).sum(axis=0)
                    weights._accumulate(gw.reshape(wdat.shape))
                if x.requires_grad:
                    gx = np.matmul(w2.T, g)
                    x._accumulate(gx.reshape(x.shape))
            return _bw

        return _make_op(out.reshape(n, desc.out_channels, oh, ow), (x, weights), backward)

    xpad = _pad_input(x.data, ph, pw)
    cols = _gather_cols(xpad, k, s, oh, ow)
    padded_shape = xpad.shape

    if desc.mode == "depthwise":
        wflat = wdat.reshape(c, k * k)
        out = np.einsum("ncql,cq->ncl", cols, wflat, optimize=True)
        _record_macs("conv_depthwise", n * c * k * k * L)

        def backward(o):
            def _bw():
                g = o.grad.reshape(n, c, L)
                if weights.requires_grad:
                    gw = np.einsum("ncl,ncql->cq", g, cols, optimize=True)
                    weights._accumulate(gw.reshape(wdat.shape))
                if x.requires_grad:
                    gcols = np.einsum("ncl,cq->ncql", g, wflat, optimize=True)
                    gpad = _scatter_cols(gcols, k, s, oh, ow, padded_shape)
                    x._accumulate(gpad[:, :, ph:ph + h, pw:pw + w])
            return _bw

        return _make_op(out.reshape(n, c, oh, ow), (x, weights), backward)

    # standard (and strided/padded pointwise)
    cols2 = cols.reshape(n, c * k * k, L)
    w2 = wdat.reshape(desc.out_channels, c * k * k)
    out = np.matmul(w2, cols2)
    _record_macs("conv_standard", n * desc.out_channels * c * k * k * L)

    def backward(o):
        def _bw():
            g = o.grad.reshape(n, desc.out_channels, L)
            if weights.requires_grad:
                gw = np.matmul(g, cols2.transpose(0, 2, 1)).sum(axis=0)
                weights._accumulate(gw.reshape(wdat.shape))
            if x.requires_grad:
                gcols = np.matmul(w2.T, g).reshape(n, c, k * k, L)
                gpad = _scatter_cols(gcols, k, s, oh, ow, padded_shape)
                x._accumulate(gpad[:, :, ph:ph + h, pw:pw + w])
        return _bw

    return _make_op(out.reshape(n, desc.out_channels, oh, ow), (x, weights), backward)


class ConvCost(NamedTuple):
    standard_cost: int
    separable_cost: int
    ratio: Fraction


def conv_cost(h, w, k, d_i, d_j) -> ConvCost:
    """Analytic multiply-accumulate costs of standard vs depthwise-separable.

    ratio is an exact rational, so ratio * separable_cost == standard_cost
    holds with no rounding.
    """
    if min(h, w, k, d_i, d_j) < 1:
        raise ValueError("all conv_cost arguments must be positive")
    standard = h * w * k * k * d_i * d_j
    separable = h * w * d_i * (k * k + d_j)
    ratio = Fraction(k * k * d_j, k * k + d_j)
    return ConvCost(standard, separable, ratio)


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def maxpool2d(x: Tensor, window: int, stride: Optional[int] = None) -> Tensor:
    """Max pooling; channels preserved. Requires divisible spatial dims when
    stride == window (the only configuration the network uses)."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d expects (N,C,H,W) input, got shape {x.shape}")
    if stride is None:
        stride = window
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive")
    n, c, h, w = x.shape
    if window == stride and (h % window or w % window):
        raise ShapeError(
            f"spatial dims {h}x{w} not divisible by window {window} (stride == window)"
        )
    if h < window or w < window:
        raise ShapeError(f"input {h}x{w} smaller than window {window}")
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1

    if window == stride:
        view = x.data.reshape(n, c, oh, window, ow, window)
        patches = view.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, window * window)
    else:
        patches = np.empty((n, c, oh, ow, window * window), dtype=x.dtype)
        for u in range(window):
            for v in range(window):
                patches[..., u * window + v] = x.data[
                    :, :, u:u + stride * oh:stride, v:v + stride * ow:stride
                ]
    arg = patches.argmax(axis=-1)
    out = np.take_along_axis(patches, arg[..., None], axis=-1)[..., 0]

    def backward(o):
        def _bw():
            if not x.requires_grad:
                return
            gpatch = np.zeros_like(patches)
            np.put_along_axis(gpatch, arg[..., None], o.grad[..., None], axis=-1)
            if window == stride:
                gx = gpatch.reshape(n, c, oh, ow, window, window) \
                    .transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
                x._accumulate(gx)
            else:
                gx = np.zeros_like(x.data)
                for u in range(window):
                    for v in range(window):
                        gx[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride] += \
                            gpatch[..., u * window + v]
                x._accumulate(gx)
        return _bw

    return _make_op(out, (x,), backward)


def global_avgpool(x: Tensor) -> Tensor:
    """Mean over all spatial positions: (N,C,H,W) -> (N,C)."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"global_avgpool expects (N,C,H,W) input, got shape {x.shape}")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def backward(o):
        def _bw():
            if x.requires_grad:
                if x.grad is None:
                    x.grad = np.zeros_like(x.data)
                x.grad += (o.grad / (h * w))[:, :, None, None]
        return _bw

    return _make_op(out, (x,), backward)


# ---------------------------------------------------------------------------
# affine / activations
# ---------------------------------------------------------------------------

def fully_connected(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map: (N,F) @ (F,O) + (O,)."""
    x, weights, bias = _as_tensor(x), _as_tensor(weights), _as_tensor(bias)
    if x.ndim != 2 or weights.ndim != 2:
        raise ShapeError(
            f"fully_connected expects 2-D input and weights, got {x.shape} and {weights.shape}"
        )
    if x.shape[1] != weights.shape[0]:
        raise ShapeError(
            f"input feature count {x.shape[1]} != weight input extent {weights.shape[0]}"
        )
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"bias shape {bias.shape} != ({weights.shape[1]},)")
    out = x.data @ weights.data + bias.data
    _record_macs("fc", x.shape[0] * weights.shape[0] * weights.shape[1])

    def backward(o):
        def _bw():
            g = o.grad
            if x.requires_grad:
                x._accumulate(g @ weights.data.T)
            if weights.requires_grad:
                weights._accumulate(x.data.T @ g)
            if bias.requires_grad:
                bias._accumulate(g.sum(axis=0))
        return _bw

    return _make_op(out, (x, weights, bias), backward)


def relu6(x: Tensor) -> Tensor:
    """Clamp to [0, 6] elementwise."""
    x = _as_tensor(x)
    out = np.minimum(np.maximum(x.data, 0), 6)

    def backward(o):
        def _bw():
            if x.requires_grad:
                mask = (x.data > 0) & (x.data < 6)
                x._accumulate(o.grad * mask)
        return _bw

    return _make_op(out, (x,), backward)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax of a (batch, classes) tensor."""
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"softmax expects (batch, classes) input, got shape {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(o):
        def _bw():
            if x.requires_grad:
                g = o.grad
                x._accumulate(p * (g - (g * p).sum(axis=1, keepdims=True)))
        return _bw

    return _make_op(p, (x,), backward)


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------

def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5):
    """Training-mode batch norm over (N,H,W) per channel.

    Returns (out, batch_mean, batch_var); the caller owns the running-stat
    update. batch_var is the biased (1/m) variance used for normalization.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 4:
        raise ShapeError(f"batch_norm expects (N,C,H,W) input, got shape {x.shape}")
    n, c, h, w = x.shape
    m = n * h * w
    axes = (0, 2, 3)
    mean = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def backward(o):
        def _bw():
            g = o.grad
            if beta.requires_grad:
                beta._accumulate(g.sum(axis=axes))
            if gamma.requires_grad:
                gamma._accumulate((g * xhat).sum(axis=axes))
            if x.requires_grad:
                gxhat = g * gamma.data[None, :, None, None]
                mean_g = gxhat.mean(axis=axes)
                mean_gx = (gxhat * xhat).mean(axis=axes)
                gx = inv_std[None, :, None, None] * (
                    gxhat - mean_g[None, :, None, None] - xhat * mean_gx[None, :, None, None]
                )
                x._accumulate(gx)
        return _bw

    return _make_op(out, (x, gamma, beta), backward), mean, var


def batch_norm_eval(x: Tensor, gamma: Tensor, beta: Tensor,
                    running_mean, running_var, eps: float = 1e-5) -> Tensor:
    """Inference-mode batch norm using fixed running statistics."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 4:
        raise ShapeError(f"batch_norm expects (N,C,H,W) input, got shape {x.shape}")
    inv_std = (1.0 / np.sqrt(running_var + eps)).astype(x.dtype)
    mean = running_mean.astype(x.dtype)
    scale = gamma.data * inv_std
    shift = beta.data - mean * scale
    out = x.data * scale[None, :, None, None] + shift[None, :, None, None]

    def backward(o):
        def _bw():
            g = o.grad
            axes = (0, 2, 3)
            if beta.requires_grad:
                beta._accumulate(g.sum(axis=axes))
            if gamma.requires_grad:
                xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
                gamma._accumulate((g * xhat).sum(axis=axes))
            if x.requires_grad:
                x._accumulate(g * scale[None, :, None, None])
        return _bw

    return _make_op(out, (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# losses and scalar plumbing
# ---------------------------------------------------------------------------

def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-probability of the true class, from raw logits."""
    logits = _as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects (batch, classes) logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} != ({n},)")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = -logp[np.arange(n), labels].mean()

    def backward(o):
        def _bw():
            if logits.requires_grad:
                p = np.exp(logp)
                p[np.arange(n), labels] -= 1.0
                logits._accumulate(p * (o.grad / n))
        return _bw

    return _make_op(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


def mse(pred: Tensor, target, sample_weight=None) -> Tensor:
    """Mean squared error; per-sample mean over coordinates, then over batch.

    ``sample_weight`` (N,), when given, scales each sample's contribution;
    the denominator stays the batch size (a zero weight masks the frame).
    """
    pred = _as_tensor(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if target.shape != pred.shape:
        raise ShapeError(f"target shape {target.shape} != prediction shape {pred.shape}")
    if pred.ndim != 2:
        raise ShapeError(f"mse expects (batch, coords) input, got {pred.shape}")
    n, f = pred.shape
    diff = pred.data - target
    per_sample = (diff * diff).mean(axis=1)
    if sample_weight is None:
        wt = None
        loss = per_sample.mean()
    else:
        wt = np.asarray(sample_weight, dtype=pred.dtype)
        if wt.shape != (n,):
            raise ShapeError(f"sample_weight shape {wt.shape} != ({n},)")
        loss = (per_sample * wt).sum() / n

    def backward(o):
        def _bw():
            if pred.requires_grad:
                g = 2.0 * diff / (n * f)
                if wt is not None:
                    g = g * wt[:, None]
                pred._accumulate(g * o.grad)
        return _bw

    return _make_op(np.asarray(loss, dtype=pred.dtype), (pred,), backward)


def sum_squares(t: Tensor) -> Tensor:
    """Sum of squared entries (the L2 penalty building block)."""
    t = _as_tensor(t)
    out = np.asarray((t.data * t.data).sum(), dtype=t.dtype)

    def backward(o):
        def _bw():
            if t.requires_grad:
                t._accumulate(2.0 * t.data * o.grad)
        return _bw

    return _make_op(out, (t,), backward)


def add(a: Tensor, b) -> Tensor:
    a = _as_tensor(a)
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
        out = a.data + b.data

        def backward(o):
            def _bw():
                if a.requires_grad:
                    a._accumulate(o.grad)
                if b.requires_grad:
                    b._accumulate(o.grad)
            return _bw

        return _make_op(out, (a, b), backward)

    const = float(b)

    def backward(o):
        def _bw():
            if a.requires_grad:
                a._accumulate(o.grad)
        return _bw

    return _make_op(a.data + const, (a,), backward)


def mul(a: Tensor, b) -> Tensor:
    a = _as_tensor(a)
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ShapeError(f"mul shapes differ: {a.shape} vs {b.shape}")
        out = a.data * b.data

        def backward(o):
            def _bw():
                if a.requires_grad:
                    a._accumulate(o.grad * b.data)
                if b.requires_grad:
                    b._accumulate(o.grad * a.data)
            return _bw

        return _make_op(out, (a, b), backward)

    const = float(b)

    def backward(o):
        def _bw():
            if a.requires_grad:
                a._accumulate(o.grad * const)
        return _bw

    return _make_op(a.data * const, (a,), backward)


def init_uniform_fan_in(rng: np.random.Generator, shape, fan_in: int,
                        dtype=DEFAULT_DTYPE) -> np.ndarray:
    """Fan-in-scaled uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
