"""Differentiable primitives over :class:`~magniflow.nn.tensor.Tensor`.

Every op returns a new node whose vector-Jacobian product yields one
gradient array per parent (``None`` for parents that need none). All
forward math is plain numpy, deterministic, and dtype-preserving.
"""

from __future__ import annotations

import functools

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ContractError
from .tensor import Tensor, as_tensor, make_node


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b)
    data = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return make_node(data, (a, b), vjp)


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b)
    data = a.data * b.data

    def vjp(g):
        ga = _unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None
        return ga, gb

    return make_node(data, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports 2-d operands and equal leading batch dims."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ContractError("matmul operands must be at least 2-d")
    data = np.matmul(a.data, b.data)

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape)
        return ga, gb

    return make_node(data, (a, b), vjp)


def conv2d(x: Tensor, weight: Tensor, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with OIHW weights, zero padding."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ContractError("conv2d expects NCHW input and OIHW weights")
    n, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin_w != cin:
        raise ContractError(f"conv2d channel mismatch: input {cin}, weight {cin_w}")
    stride = int(stride)
    padding = int(padding)
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d stride must be >= 1 and padding >= 0, got {stride}, {padding}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ContractError(f"conv2d kernel {kh}x{kw} does not fit input {h}x{w} with pad {padding}")
    if bias is not None and bias.shape != (cout,):
        raise ContractError(f"conv2d bias shape {bias.shape} != ({cout},)")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n, oh * ow, cin * kh * kw)
    wmat = weight.data.reshape(cout, -1)
    out = (cols @ wmat.T).transpose(0, 2, 1).reshape(n, cout, oh, ow)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n, oh * ow, cout)
        gx = gw = gb = None
        if weight.requires_grad:
            gw = np.einsum("nqo,nqk->ok", gmat, cols).reshape(weight.shape)
        if x.requires_grad:
            dcols = (gmat @ wmat).reshape(n, oh, ow, cin, kh, kw)
            gxp = np.zeros_like(xp)
            for dy in range(kh):
                for dx in range(kw):
                    gxp[:, :, dy : dy + stride * oh : stride, dx : dx + stride * ow : stride] += (
                        dcols[:, :, :, :, dy, dx].transpose(0, 3, 1, 2)
                    )
            gx = gxp[:, :, padding : padding + h, padding : padding + w]
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw) if bias is None else (gx, gw, gb)

    return make_node(out, parents, vjp)


def group_norm(x: Tensor, groups: int, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-group zero mean / unit variance over (channels-in-group, H, W)."""
    if x.ndim != 4:
        raise ContractError("group_norm expects NCHW input")
    n, c, h, w = x.shape
    if groups < 1 or c % groups != 0:
        raise ContractError(f"channels {c} not divisible by groups {groups}")
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    if gain.shape != (c,) or shift.shape != (c,):
        raise ContractError("gain and shift must have one entry per channel")

    xg = x.data.reshape(n, groups, -1)
    mean = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xg - mean) * inv
    out = xhat.reshape(n, c, h, w) * gain.data.reshape(1, c, 1, 1) + shift.data.reshape(1, c, 1, 1)

    def vjp(g):
        xhat4 = xhat.reshape(n, c, h, w)
        ggain = (g * xhat4).sum(axis=(0, 2, 3)) if gain.requires_grad else None
        gshift = g.sum(axis=(0, 2, 3)) if shift.requires_grad else None
        gx = None
        if x.requires_grad:
            dxhat = (g * gain.data.reshape(1, c, 1, 1)).reshape(n, groups, -1)
            gx = inv * (
                dxhat
                - dxhat.mean(axis=2, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=2, keepdims=True)
            )
            gx = gx.reshape(n, c, h, w)
        return gx, ggain, gshift

    return make_node(out, (x, gain, shift), vjp)


@functools.lru_cache(maxsize=64)
def _up2_matrix(n: int) -> np.ndarray:
    """(2n, n) bilinear x2 interpolation with half-pixel centers, clamped."""
    mat = np.zeros((2 * n, n), dtype=np.float64)
    for i in range(2 * n):
        pos = i / 2.0 - 0.25
        lo = int(np.floor(pos))
        t = pos - lo
        mat[i, min(max(lo, 0), n - 1)] += 1.0 - t
        mat[i, min(max(lo + 1, 0), n - 1)] += t
    return mat


def resample2x(x: Tensor, direction: str) -> Tensor:
    """Spatial x2 resampling of NCHW: ``up`` bilinear, ``down`` 2x2 mean."""
    if x.ndim != 4:
        raise ContractError("resample2x expects NCHW input")
    n, c, h, w = x.shape
    if direction == "up":
        my = _up2_matrix(h).astype(x.dtype)
        mx = _up2_matrix(w).astype(x.dtype)
        out = np.matmul(np.matmul(my, x.data), mx.T)

        def vjp(g):
            return (np.matmul(np.matmul(my.T, g), mx),)

        return make_node(out, (x,), vjp)
    if direction == "down":
        if h % 2 or w % 2:
            raise ContractError(f"downsampling needs even extents, got {h}x{w}")
        out = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

        def vjp(g):
            return (np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25,)

        return make_node(out, (x,), vjp)
    raise ContractError(f"direction must be 'up' or 'down', got {direction!r}")


def softmax_axis(x: Tensor, axis: int) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        raise ContractError(f"axis {axis} invalid for rank {x.ndim}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_node(y, (x,), vjp)


def silu(x: Tensor) -> Tensor:
    s = expit(x.data)
    out = x.data * s

    def vjp(g):
        return (g * s * (1.0 + x.data * (1.0 - s)),)

    return make_node(out, (x,), vjp)


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)

    def vjp(g):
        return (g * s * (1.0 - s),)

    return make_node(s, (x,), vjp)


def absolute(x: Tensor) -> Tensor:
    def vjp(g):
        return (g * np.sign(x.data),)

    return make_node(np.abs(x.data), (x,), vjp)


def reduce_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return make_node(np.asarray(data), (x,), vjp)


def reduce_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    summed = reduce_sum(x, axis=axis, keepdims=keepdims)
    count = x.data.size // max(summed.data.size, 1)
    return mul(summed, 1.0 / float(count))


def reshape(x: Tensor, shape) -> Tensor:
    def vjp(g):
        return (g.reshape(x.data.shape),)

    return make_node(x.data.reshape(shape), (x,), vjp)


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def vjp(g):
        return (g.transpose(inverse),)

    return make_node(np.ascontiguousarray(x.data.transpose(axes)), (x,), vjp)


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_node(data, tuple(tensors), vjp)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice ``[start, start+length)`` along one axis."""
    if start < 0 or length < 1 or start + length > x.shape[axis]:
        raise ContractError(f"slice [{start}, {start + length}) outside axis of {x.shape[axis]}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def vjp(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return make_node(np.ascontiguousarray(x.data[index]), (x,), vjp)


_OFFSETS3 = [(dy, dx) for dy in range(3) for dx in range(3)]


def neighborhood3x3(x: Tensor) -> Tensor:
    """Stack the 9 one-pixel-shifted copies of NCHW as (N, C, 9, H, W).

    Borders use replicate padding; entry k = 3*dy + dx holds the view
    shifted so that index 4 is the pixel itself.
    """
    if x.ndim != 4:
        raise ContractError("neighborhood3x3 expects NCHW input")
    n, c, h, w = x.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="edge")
    out = np.stack([xp[:, :, dy : dy + h, dx : dx + w] for dy, dx in _OFFSETS3], axis=2)

    def vjp(g):
        gp = np.zeros((n, c, h + 2, w + 2), dtype=g.dtype)
        for k, (dy, dx) in enumerate(_OFFSETS3):
            gp[:, :, dy : dy + h, dx : dx + w] += g[:, :, k]
        # fold replicate-padding borders back onto the edge pixels
        core = gp[:, :, 1:-1, 1:-1].copy()
        core[:, :, 0, :] += gp[:, :, 0, 1:-1]
        core[:, :, -1, :] += gp[:, :, -1, 1:-1]
        core[:, :, :, 0] += gp[:, :, 1:-1, 0]
        core[:, :, :, -1] += gp[:, :, 1:-1, -1]
        core[:, :, 0, 0] += gp[:, :, 0, 0]
        core[:, :, 0, -1] += gp[:, :, 0, -1]
        core[:, :, -1, 0] += gp[:, :, -1, 0]
        core[:, :, -1, -1] += gp[:, :, -1, -1]
        return (core,)

    return make_node(out, (x,), vjp)


def warp_fixed(x: Tensor, flow: np.ndarray) -> Tensor:
    """Backward-warp NCHW content by a fixed (non-learned) flow.

    ``flow`` is (2, H, W) or (N, 2, H, W) with (u, v) displacement in
    pixels; output pixel (y, x) bilinearly samples input (y + v, x + u)
    with coordinates clamped to the frame. Gradients reach ``x`` only.
    """
    if x.ndim != 4:
        raise ContractError("warp_fixed expects NCHW input")
    n, c, h, w = x.shape
    flow = np.asarray(flow, dtype=np.float64)
    if flow.shape == (2, h, w):
        flow = np.broadcast_to(flow, (n, 2, h, w))
    if flow.shape != (n, 2, h, w):
        raise ContractError(f"flow shape {flow.shape} incompatible with input {x.shape}")

    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    gx = np.clip(xs + flow[:, 0], 0, w - 1)
    gy = np.clip(ys + flow[:, 1], 0, h - 1)
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (gx - x0).astype(x.dtype)
    fy = (gy - y0).astype(x.dtype)

    weights = [
        ((1 - fy) * (1 - fx), y0 * w + x0),
        ((1 - fy) * fx, y0 * w + x1),
        (fy * (1 - fx), y1 * w + x0),
        (fy * fx, y1 * w + x1),
    ]
    flat = x.data.reshape(n, c, h * w)
    out = np.zeros_like(x.data)
    for wgt, idx in weights:
        lookup = np.broadcast_to(idx.reshape(n, 1, h * w), (n, c, h * w))
        gathered = np.take_along_axis(flat, lookup, axis=2)
        out += wgt[:, None] * gathered.reshape(n, c, h, w)

    def vjp(g):
        gflat = np.zeros((n * c, h * w), dtype=g.dtype)
        rows = np.repeat(np.arange(n * c) * (h * w), h * w)
        for wgt, idx in weights:
            contrib = (g * wgt[:, None]).reshape(n * c, h * w)
            targets = rows + np.broadcast_to(idx.reshape(n, 1, h * w), (n, c, h * w)).ravel()
            gflat += np.bincount(targets, weights=contrib.ravel(), minlength=n * c * h * w).reshape(
                n * c, h * w
            ).astype(g.dtype)
        return (gflat.reshape(n, c, h, w),)

    return make_node(out, (x,), vjp)
