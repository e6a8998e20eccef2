"""Scale selection and coarse-to-fine pyramids for frame synthesis."""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from .. import nn
from ..errors import ContractError
from ..flowcore import resize

MIN_RESOLUTION = 64


def num_scales(height: int, width: int, min_resolution: int = MIN_RESOLUTION) -> int:
    """Number of pyramid levels for an input resolution.

    L = ceil(log2(min(H, W) / min_resolution)) + 1. Inputs smaller than the
    threshold fall back to a single scale with a warning instead of failing.
    """
    if height < 1 or width < 1:
        raise ContractError(f"image dims must be positive, got {height}x{width}")
    shortest = min(height, width)
    if shortest < min_resolution:
        warnings.warn(
            f"resolution {height}x{width} below the {min_resolution}px threshold; "
            "using a single scale",
            RuntimeWarning,
            stacklevel=2,
        )
        return 1
    return math.ceil(math.log2(shortest / min_resolution)) + 1


@dataclasses.dataclass
class PyramidLevel:
    """One scale of the synthesis pyramid.

    ``image`` and ``flow`` are (N, C, h, w) / (N, 2, h, w) arrays downsampled
    from the originals; flow values are rescaled by ``scale`` so they stay in
    level pixels. ``features`` / ``features_warped`` are graph tensors when an
    encoder was supplied, else None. Warps pull along the negated flow so the
    warped members approximate the target frame at this scale.
    """

    level: int
    scale: float
    image: np.ndarray
    flow: np.ndarray
    features: object
    image_warped: np.ndarray
    features_warped: object


def _resize_batch(arrays: np.ndarray, factor: float, kind: str) -> np.ndarray:
    if factor == 1.0:
        return np.asarray(arrays, dtype=np.float64)
    out = []
    for sample in arrays:
        hwc = np.moveaxis(np.asarray(sample, dtype=np.float64), 0, -1)
        out.append(np.moveaxis(resize(hwc, factor, kind=kind), -1, 0))
    return np.stack(out)


def build_pyramid(images: np.ndarray, flows: np.ndarray, levels: int, encoder=None) -> list:
    """Build synthesis levels in recurrence order (coarsest first).

    ``images`` is (N, C, H, W), ``flows`` is (N, 2, H, W) in finest-level
    pixels. Each level holds the inputs bicubically downsampled by 1/2^l with
    flow values rescaled to match, plus backward warps of the image (and of
    the encoded features when ``encoder`` is given).
    """
    images = np.asarray(images, dtype=np.float64)
    flows = np.asarray(flows, dtype=np.float64)
    if images.ndim != 4 or flows.ndim != 4 or flows.shape[1] != 2:
        raise ContractError(
            f"expected (N, C, H, W) images with (N, 2, H, W) flows, "
            f"got {images.shape} and {flows.shape}"
        )
    if images.shape[0] != flows.shape[0] or images.shape[2:] != flows.shape[2:]:
        raise ContractError(
            f"images and flows disagree: {images.shape} vs {flows.shape}"
        )
    if levels < 1:
        raise ContractError(f"levels must be >= 1, got {levels}")

    pyramid = []
    for level in range(levels - 1, -1, -1):
        scale = 1.0 / (1 << level)
        image = _resize_batch(images, scale, "image")
        flow = _resize_batch(flows, scale, "flow")
        neg = -flow
        image_warped = nn.warp_fixed(nn.Tensor(image), neg).data
        features = features_warped = None
        if encoder is not None:
            features = encoder(image)
            features_warped = nn.warp_fixed(features, neg)
        pyramid.append(
            PyramidLevel(level, scale, image, flow, features, image_warped, features_warped)
        )
    return pyramid
