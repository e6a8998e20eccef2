"""Value types for dense flow fields, images, and metric summaries.

Both array-backed types validate on construction and freeze their buffers,
so instances can be shared across threads without copies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError


def _frozen_f32(arr, name):
    out = np.asarray(arr, dtype=np.float32)
    if out.ndim != 2 or out.shape[0] < 1 or out.shape[1] < 1:
        raise ContractError(f"{name} must be a 2-d array with positive dims, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ContractError(f"{name} contains non-finite values")
    out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel displacement field, components in pixels.

    ``u`` is the horizontal (x) component, ``v`` the vertical (y) component,
    both ``(height, width)`` float32.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen_f32(self.u, "u"))
        object.__setattr__(self, "v", _frozen_f32(self.v, "v"))
        if self.u.shape != self.v.shape:
            raise ContractError(f"u/v shape mismatch: {self.u.shape} vs {self.v.shape}")

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    def stack(self) -> np.ndarray:
        """Return a writable (H, W, 2) copy with u in channel 0."""
        return np.stack([self.u, self.v], axis=-1).astype(np.float32)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u.astype(np.float64), self.v.astype(np.float64))

    @classmethod
    def from_array(cls, arr) -> "FlowField":
        arr = np.asarray(arr)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ContractError(f"expected (H, W, 2) flow array, got shape {arr.shape}")
        return cls(u=arr[..., 0], v=arr[..., 1])

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        z = np.zeros((height, width), dtype=np.float32)
        return cls(u=z, v=z.copy())


@dataclass(frozen=True)
class ImageBuffer:
    """Image with float32 intensities in [0, 1], shape (H, W, C), C in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ContractError(f"expected (H, W, 1|3) image, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ContractError(f"image dims must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ContractError("image contains non-finite values")
        if arr.min() < -1e-6 or arr.max() > 1 + 1e-6:
            raise ContractError(
                f"image intensities must lie in [0, 1], got [{arr.min():.4g}, {arr.max():.4g}]"
            )
        arr = np.clip(arr, 0.0, 1.0).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def luminance(self) -> np.ndarray:
        """Rec. 601 luma as a (H, W) float64 array."""
        d = self.data.astype(np.float64)
        if self.channels == 1:
            return d[:, :, 0]
        return 0.299 * d[:, :, 0] + 0.587 * d[:, :, 1] + 0.114 * d[:, :, 2]


@dataclass
class MetricReport:
    """Aggregate quality numbers for a predicted sequence.

    Flow error is mean endpoint error in pixels; image metrics use peak 1.0.
    Per-frame lists are empty when the corresponding inputs were absent.
    """

    epe_mean: float = float("nan")
    psnr: float = float("nan")
    ssim: float = float("nan")
    per_frame_epe: list = field(default_factory=list)
    per_frame_psnr: list = field(default_factory=list)
    per_frame_ssim: list = field(default_factory=list)

    def __post_init__(self):
        if not np.isnan(self.epe_mean) and self.epe_mean < 0:
            raise ContractError("epe_mean must be >= 0")
        if not np.isnan(self.ssim) and self.ssim > 1.0 + 1e-9:
            raise ContractError("ssim cannot exceed 1")
