"""Photon-noise simulation and log-normal magnitude fitting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, DegenerateFitError
from ..flowcore import ImageBuffer

DEFAULT_MU = -4.303
DEFAULT_SIGMA = 0.527


@dataclass(frozen=True)
class NoiseModel:
    """Log-normal flow-noise statistics plus the smoothing width in pixels."""

    mu: float = DEFAULT_MU
    sigma: float = DEFAULT_SIGMA
    blur_sigma: float = 3.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ContractError(f"sigma must be > 0, got {self.sigma}")
        if self.blur_sigma < 0:
            raise ContractError(f"blur_sigma must be >= 0, got {self.blur_sigma}")


def fit_lognormal_mle(samples) -> tuple:
    """Maximum-likelihood (mu, sigma) of a log-normal from positive samples.

    mu is the mean of ln(x); sigma the population standard deviation of ln(x).
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise DegenerateFitError(f"need at least 2 samples, got {x.size}")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ContractError("samples must be positive finite reals")
    logs = np.log(x)
    return float(logs.mean()), float(logs.std(ddof=0))


def photon_noise_field(image: ImageBuffer, strength: float, rng: np.random.Generator):
    """Unclamped additive noise: zero-mean Gaussian, variance = intensity,
    scaled by strength."""
    if strength < 0:
        raise ContractError(f"strength must be >= 0, got {strength}")
    std = np.sqrt(image.data.astype(np.float64))
    return strength * std * rng.standard_normal(image.data.shape)


def simulate_photon_noise(image: ImageBuffer, strength: float, seed) -> ImageBuffer:
    """Add intensity-dependent shot noise and clamp back to [0, 1].

    A zero image is returned unchanged (zero variance), as is strength 0.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noise = photon_noise_field(image, strength, rng)
    return ImageBuffer(np.clip(image.data.astype(np.float64) + noise, 0.0, 1.0))
