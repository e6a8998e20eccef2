"""Dense coarse-to-fine Lucas-Kanade flow estimation.

Deterministic and purely numpy/scipy based; textureless windows resolve to
zero displacement instead of NaN. Intended as the internal flow source for
the magnification pipeline and as the measurement stage of noise fitting.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ContractError
from .ops import gaussian_blur, resize, warp_array
from .types import FlowField, ImageBuffer

_MIN_DET = 1e-9
_MIN_TRACE = 1e-8


def _gray(image: ImageBuffer) -> np.ndarray:
    return image.luminance()


def _gradients(arr: np.ndarray) -> tuple:
    gx = np.gradient(arr, axis=1)
    gy = np.gradient(arr, axis=0)
    return gx, gy


def estimate_flow(
    frame_a: ImageBuffer,
    frame_b: ImageBuffer,
    *,
    levels: int = 3,
    window: int = 9,
    iterations: int = 3,
    smoothing: float = 0.8,
) -> FlowField:
    """Estimate per-pixel displacement that carries frame_a onto frame_b.

    The returned flow follows the first-to-second convention: a pixel at p in
    frame_a appears near p + flow(p) in frame_b, so warping frame_b backward
    by the flow approximately reproduces frame_a. Identical frames return an
    exactly zero field.

    Args:
        frame_a: reference frame.
        frame_b: query frame of the same size.
        levels: pyramid depth (>= 1); each level halves the resolution.
        window: odd least-squares window size in pixels.
        iterations: warp/solve refinements per level.
        smoothing: Gaussian sigma applied to the flow after each level's
            refinements (0 disables); regularizes weak-texture windows.
    """
    if (frame_a.height, frame_a.width) != (frame_b.height, frame_b.width):
        raise ContractError("frames must share dimensions")
    if levels < 1:
        raise ContractError(f"levels must be >= 1, got {levels}")
    if window < 3 or window % 2 == 0:
        raise ContractError(f"window must be odd and >= 3, got {window}")
    if iterations < 1:
        raise ContractError(f"iterations must be >= 1, got {iterations}")
    if smoothing < 0:
        raise ContractError(f"smoothing must be >= 0, got {smoothing}")

    a = _gray(frame_a)
    b = _gray(frame_b)
    pyr_a = [a]
    pyr_b = [b]
    for _ in range(levels - 1):
        if min(pyr_a[-1].shape) < 2 * window:
            break
        pyr_a.append(resize(pyr_a[-1], 0.5))
        pyr_b.append(resize(pyr_b[-1], 0.5))

    u = np.zeros_like(pyr_a[-1])
    v = np.zeros_like(pyr_a[-1])
    for level in range(len(pyr_a) - 1, -1, -1):
        al = pyr_a[level]
        bl = pyr_b[level]
        if u.shape != al.shape:
            u = 2.0 * resize(u, 2.0)
            v = 2.0 * resize(v, 2.0)
            if u.shape != al.shape:  # odd parent dims: re-rasterize to fit
                u = _fit_to(u, al.shape)
                v = _fit_to(v, al.shape)
        for _ in range(iterations):
            warped = warp_array(bl, u, v)
            gx, gy = _gradients(warped)
            resid = warped - al
            sxx = ndimage.uniform_filter(gx * gx, size=window, mode="reflect")
            sxy = ndimage.uniform_filter(gx * gy, size=window, mode="reflect")
            syy = ndimage.uniform_filter(gy * gy, size=window, mode="reflect")
            bx = ndimage.uniform_filter(gx * resid, size=window, mode="reflect")
            by = ndimage.uniform_filter(gy * resid, size=window, mode="reflect")
            # Tikhonov damping keeps weak-texture windows from exploding and
            # sends truly textureless ones to an exactly zero update.
            lam = 1e-3 * (sxx + syy) + _MIN_TRACE
            axx = sxx + lam
            ayy = syy + lam
            det = axx * ayy - sxy * sxy
            ok = (det > _MIN_DET) & ((sxx + syy) > _MIN_TRACE) & ((np.abs(bx) + np.abs(by)) > 0)
            safe_det = np.where(ok, det, 1.0)
            du = np.where(ok, -(ayy * bx - sxy * by) / safe_det, 0.0)
            dv = np.where(ok, -(axx * by - sxy * bx) / safe_det, 0.0)
            # Bilinear linearization only holds for ~1 px steps.
            u = u + np.clip(du, -1.0, 1.0)
            v = v + np.clip(dv, -1.0, 1.0)
        if smoothing > 0:
            u = gaussian_blur(u, smoothing)
            v = gaussian_blur(v, smoothing)
    return FlowField(u=u.astype(np.float32), v=v.astype(np.float32))


def _fit_to(arr: np.ndarray, shape: tuple) -> np.ndarray:
    out = np.zeros(shape, dtype=arr.dtype)
    h = min(shape[0], arr.shape[0])
    w = min(shape[1], arr.shape[1])
    out[:h, :w] = arr[:h, :w]
    return out
