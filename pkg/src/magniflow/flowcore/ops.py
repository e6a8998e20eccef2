"""Dense field operations: warping, resampling, blurring, flow rendering."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage

from ..errors import ContractError
from .types import FlowField, ImageBuffer


def bilinear_sample(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample arr (H, W[, C]) at float coords, clamping to the edge.

    xs/ys share a broadcastable shape; the result has that shape (+ channels).
    """
    h, w = arr.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0).astype(arr.dtype if arr.dtype.kind == "f" else np.float64)
    fy = (ys - y0).astype(fx.dtype)
    if arr.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    p00 = arr[y0, x0]
    p01 = arr[y0, x1]
    p10 = arr[y1, x0]
    p11 = arr[y1, x1]
    top = p00 + (p01 - p00) * fx
    bot = p10 + (p11 - p10) * fx
    return top + (bot - top) * fy


def warp_array(arr: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Backward warp: out(p) = arr(p + flow(p)) with bilinear lookup."""
    h, w = arr.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return bilinear_sample(arr, xs + u, ys + v)


def warp_backward(image: ImageBuffer, flow: FlowField) -> ImageBuffer:
    """Pull pixels through a displacement field.

    The output at pixel p is the input sampled at p + flow(p); out-of-range
    lookups clamp to the nearest edge pixel. Zero flow is an exact identity.
    """
    if (image.height, image.width) != (flow.height, flow.width):
        raise ContractError(
            f"image {image.height}x{image.width} vs flow {flow.height}x{flow.width}"
        )
    out = warp_array(image.data.astype(np.float64), flow.u, flow.v)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def _cubic_kernel(x: np.ndarray) -> np.ndarray:
    """Catmull-Rom cubic (a = -0.5), support (-2, 2), partition of unity."""
    ax = np.abs(x)
    out = np.zeros_like(ax)
    inner = ax <= 1.0
    outer = (ax > 1.0) & (ax < 2.0)
    out[inner] = (1.5 * ax[inner] - 2.5) * ax[inner] ** 2 + 1.0
    out[outer] = ((-0.5 * ax[outer] + 2.5) * ax[outer] - 4.0) * ax[outer] + 2.0
    return out


@lru_cache(maxsize=64)
def _resize_matrix(n_in: int, n_out: int, factor: float) -> np.ndarray:
    """Row-stochastic (n_out, n_in) bicubic resampling matrix for one axis.

    Output sample o reads input coordinate (o + 0.5)/factor - 0.5. When
    shrinking, the kernel is stretched by 1/factor to act as an antialias
    filter. Taps outside the signal clamp to the border; each row is
    renormalized so constants are preserved exactly.
    """
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    scale = min(factor, 1.0)
    rad = 2.0 / scale
    for o in range(n_out):
        center = (o + 0.5) / factor - 0.5
        lo = int(np.ceil(center - rad))
        hi = int(np.floor(center + rad))
        taps = np.arange(lo, hi + 1)
        weights = _cubic_kernel((center - taps) * scale) * scale
        np.add.at(mat[o], np.clip(taps, 0, n_in - 1), weights)
        mat[o] /= mat[o].sum()
    return mat


def resize(field, factor: float, *, kind: str = "image"):
    """Bicubic resampling by a power-of-two factor.

    kind "image" resamples intensities; kind "flow" additionally multiplies
    the displacement values by the factor so they stay in output pixels.
    Accepts ImageBuffer/FlowField or bare (H, W[, C]) arrays and returns the
    matching type.
    """
    if factor <= 0 or abs(np.log2(factor) - round(np.log2(factor))) > 1e-9:
        raise ContractError(f"factor must be a power of two, got {factor}")
    if kind not in ("image", "flow"):
        raise ContractError(f"kind must be image or flow, got {kind!r}")

    if isinstance(field, ImageBuffer):
        out = resize(field.data, factor, kind="image")
        return ImageBuffer(np.clip(out, 0.0, 1.0))
    if isinstance(field, FlowField):
        out = resize(field.stack(), factor, kind="flow")
        return FlowField.from_array(out)

    arr = np.asarray(field, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    h, w = arr.shape[:2]
    oh = max(1, int(np.floor(h * factor + 0.5)))
    ow = max(1, int(np.floor(w * factor + 0.5)))
    rows = _resize_matrix(h, oh, factor)
    cols = _resize_matrix(w, ow, factor)
    out = np.einsum("oi,ijc->ojc", rows, arr)
    out = np.einsum("pj,ojc->opc", cols, out)
    if kind == "flow":
        out = out * factor
    return out[:, :, 0] if squeeze else out


def gaussian_blur(field: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with radius ceil(3*sigma).

    The 1-d kernel is the normalized Gaussian sampled on [-r, r]; borders use
    edge-inclusive mirroring. Works on (H, W) or (H, W, C) arrays. sigma 0 is
    the identity.
    """
    if sigma < 0:
        raise ContractError(f"sigma must be >= 0, got {sigma}")
    arr = np.asarray(field, dtype=np.float64)
    if sigma == 0:
        return arr.copy()
    r = int(np.ceil(3.0 * sigma))
    taps = np.arange(-r, r + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (taps / sigma) ** 2)
    kernel /= kernel.sum()
    out = ndimage.correlate1d(arr, kernel, axis=0, mode="reflect")
    return ndimage.correlate1d(out, kernel, axis=1, mode="reflect")


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    i = np.floor(h * 6.0).astype(np.int64) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def flow_to_color(flow: FlowField, max_norm: float | None = None) -> ImageBuffer:
    """Render flow directions as hue and magnitude as saturation.

    Zero vectors map to white. max_norm sets the magnitude that saturates the
    color; it defaults to the field's max magnitude (or 1 for an all-zero
    field). Magnitudes above max_norm clamp to full saturation.
    """
    mag = flow.magnitude()
    if max_norm is None:
        peak = float(mag.max())
        max_norm = peak if peak > 0 else 1.0
    if max_norm <= 0:
        raise ContractError(f"max_norm must be > 0, got {max_norm}")
    hue = np.mod(np.arctan2(flow.v.astype(np.float64), flow.u.astype(np.float64)), 2 * np.pi)
    hue /= 2 * np.pi
    sat = np.clip(mag / max_norm, 0.0, 1.0)
    rgb = _hsv_to_rgb(hue, sat, np.ones_like(sat))
    return ImageBuffer(np.clip(rgb, 0.0, 1.0))
