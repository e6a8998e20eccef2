"""Quality metrics: endpoint error for flows, PSNR/SSIM for images."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ContractError
from .types import FlowField, ImageBuffer

PSNR_CAP = 99.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def endpoint_error(pred: FlowField, truth: FlowField) -> np.ndarray:
    """Per-pixel endpoint error |pred - truth| in pixels, float64 (H, W)."""
    if (pred.height, pred.width) != (truth.height, truth.width):
        raise ContractError(
            f"flow dims mismatch: {pred.height}x{pred.width} vs {truth.height}x{truth.width}"
        )
    du = pred.u.astype(np.float64) - truth.u.astype(np.float64)
    dv = pred.v.astype(np.float64) - truth.v.astype(np.float64)
    return np.hypot(du, dv)


def flow_metrics(pred: FlowField, truth: FlowField) -> float:
    """Mean endpoint error in pixels."""
    return float(endpoint_error(pred, truth).mean())


def psnr(pred: ImageBuffer, truth: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB against peak 1.0, capped at 99."""
    if pred.data.shape != truth.data.shape:
        raise ContractError(f"image shape mismatch: {pred.data.shape} vs {truth.data.shape}")
    mse = float(np.mean((pred.data.astype(np.float64) - truth.data.astype(np.float64)) ** 2))
    if mse <= 10.0 ** (-PSNR_CAP / 10.0):
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * np.log10(mse))


def _ssim_window(size: int) -> np.ndarray:
    taps = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (taps / _SSIM_SIGMA) ** 2)
    return k / k.sum()


def _win_mean(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(arr, kernel, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="nearest")
    r = (len(kernel) - 1) // 2
    return out[r : arr.shape[0] - r, r : arr.shape[1] - r]


def ssim(pred: ImageBuffer, truth: ImageBuffer) -> float:
    """Mean structural similarity over the luminance channel.

    Uses an 11x11 Gaussian window (sigma 1.5) evaluated only where the window
    fits entirely inside the image, averaging the resulting map. Images
    smaller than the window shrink it to the largest odd size that fits.
    """
    if pred.data.shape != truth.data.shape:
        raise ContractError(f"image shape mismatch: {pred.data.shape} vs {truth.data.shape}")
    x = pred.luminance()
    y = truth.luminance()
    size = min(_SSIM_WINDOW, x.shape[0], x.shape[1])
    if size % 2 == 0:
        size -= 1
    if size < 1:
        raise ContractError("image too small for SSIM")
    kernel = _ssim_window(size)
    mx = _win_mean(x, kernel)
    my = _win_mean(y, kernel)
    mxx = _win_mean(x * x, kernel)
    myy = _win_mean(y * y, kernel)
    mxy = _win_mean(x * y, kernel)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    c1 = _SSIM_K1 ** 2
    c2 = _SSIM_K2 ** 2
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def image_metrics(pred: ImageBuffer, truth: ImageBuffer) -> tuple:
    """(psnr_db, ssim) for a predicted frame against its reference."""
    return psnr(pred, truth), ssim(pred, truth)


def phase_correlation(a: np.ndarray, b: np.ndarray, upsample: int = 64) -> tuple:
    """Translation (dx, dy) such that b is approximately a shifted by it.

    Classic phase correlation with a Hann window; the integer peak is refined
    by evaluating an upsampled local DFT in a +-1.5 px neighborhood, giving
    roughly 1/upsample pixel resolution. Inputs are 2-d arrays of equal shape.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ContractError(f"phase correlation needs equal 2-d arrays, got {a.shape}, {b.shape}")
    h, w = a.shape
    win = np.outer(np.hanning(h), np.hanning(w))
    fa = np.fft.fft2((a - a.mean()) * win)
    fb = np.fft.fft2((b - b.mean()) * win)
    cross = fa * np.conj(fb)
    cross /= np.maximum(np.abs(cross), 1e-12)
    # Resampled imagery carries unreliable phase near Nyquist; keep the low
    # band where translation phase is clean.
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    cross *= np.exp(-0.5 * ((fy / 0.12) ** 2 + (fx / 0.12) ** 2))
    corr = np.real(np.fft.ifft2(cross))
    py, px = np.unravel_index(np.argmax(corr), corr.shape)

    ky = np.fft.fftfreq(h)[:, None]
    kx = np.fft.fftfreq(w)[None, :]
    ys = py + np.arange(-1.5 * upsample, 1.5 * upsample + 1) / upsample
    xs = px + np.arange(-1.5 * upsample, 1.5 * upsample + 1) / upsample
    rows = np.exp(2j * np.pi * ys[:, None] * ky.ravel()[None, :])
    cols = np.exp(2j * np.pi * kx.ravel()[:, None] * xs[None, :])
    local = np.real(rows @ cross @ cols)
    iy, ix = np.unravel_index(np.argmax(local), local.shape)
    sy, sx = ys[iy], xs[ix]
    if sy > h / 2:
        sy -= h
    if sx > w / 2:
        sx -= w
    # The correlation surface peaks at the negated displacement.
    return -float(sx), -float(sy)
