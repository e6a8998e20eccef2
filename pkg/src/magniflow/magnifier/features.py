"""Scalar conditioning features: harmonic magnification encoding, timestep embedding."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ContractError

DEFAULT_K = 4
DEFAULT_ALPHA_MAX = 100.0


def harmonic_alpha_features(alpha, k_terms: int = DEFAULT_K, alpha_max: float = DEFAULT_ALPHA_MAX):
    """Pre-fusion encoding of the magnification factor.

    Returns ``[n, cos(2pi 2^k n) for k=1..K, sin(2pi 2^k n) for k=1..K]``
    with n = alpha / alpha_max, one row per input. Factors outside
    [0, alpha_max] clamp with a warning rather than extrapolating.
    """
    if k_terms < 1:
        raise ContractError(f"k_terms must be >= 1, got {k_terms}")
    if alpha_max <= 0:
        raise ContractError(f"alpha_max must be positive, got {alpha_max}")
    alphas = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    if alphas.ndim != 1:
        raise ContractError("alpha must be scalar or 1-d")
    if (alphas < 0).any() or (alphas > alpha_max).any():
        warnings.warn(
            f"magnification outside [0, {alpha_max}] clamped", RuntimeWarning, stacklevel=2
        )
        alphas = np.clip(alphas, 0.0, alpha_max)
    n = alphas / alpha_max
    freqs = 2.0 ** np.arange(1, k_terms + 1)
    angles = 2.0 * np.pi * n[:, None] * freqs[None, :]
    feats = np.concatenate([n[:, None], np.cos(angles), np.sin(angles)], axis=1)
    if np.isscalar(alpha) or np.asarray(alpha).ndim == 0:
        return feats[0]
    return feats


def timestep_embedding(t, dim: int):
    """Sinusoidal encoding of integer diffusion timesteps, shape (N, dim)."""
    if dim < 2 or dim % 2:
        raise ContractError(f"embedding dim must be even and >= 2, got {dim}")
    steps = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    args = steps[:, None] * freqs[None, :]
    return np.concatenate([np.cos(args), np.sin(args)], axis=1)
