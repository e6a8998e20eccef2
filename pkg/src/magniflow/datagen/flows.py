"""Conditional/target flow construction and the background noise field."""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..flowcore import FlowField, gaussian_blur
from .masks import RegionSpec, generate_mask
from .noise import NoiseModel


def sample_directions(n: int, d: int, seed) -> np.ndarray:
    """Sample n motion directions from d equal angle segments, no repeats.

    Segment k covers [2*pi*k/d, 2*pi*(k+1)/d); each chosen segment contributes
    one angle uniform within it. Deterministic for a fixed seed.
    """
    if not (1 <= n <= d):
        raise ContractError(f"need 1 <= n <= d, got n={n}, d={d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    segments = rng.choice(d, size=n, replace=False)
    offsets = rng.uniform(0.0, 1.0, size=n)
    return (segments + offsets) * (2 * np.pi / d)


def compose_conditional_flow(regions: list, dims: tuple) -> tuple:
    """Paint each region's constant motion vector into an (initially zero) field.

    Returns (flow, union_mask). Pixels covered by several regions take the
    last-listed region's vector; outside all masks the flow is zero.
    """
    if not regions:
        raise ContractError("regions must be nonempty")
    h, w = dims
    u = np.zeros((h, w), dtype=np.float32)
    v = np.zeros((h, w), dtype=np.float32)
    union = np.zeros((h, w), dtype=bool)
    for region in regions:
        mask = generate_mask(region, dims)
        u[mask] = np.float32(region.magnitude * np.cos(region.direction))
        v[mask] = np.float32(region.magnitude * np.sin(region.direction))
        union |= mask
    return FlowField(u=u, v=v), union


def make_target_flow(conditional: FlowField, union_mask: np.ndarray, alpha: float) -> FlowField:
    """Magnified noise-free target: alpha * conditional inside the mask union,
    exactly zero outside."""
    if alpha < 0:
        raise ContractError(f"alpha must be >= 0, got {alpha}")
    a32 = np.float32(alpha)
    zero = np.float32(0.0)
    u = np.where(union_mask, a32 * conditional.u, zero)
    v = np.where(union_mask, a32 * conditional.v, zero)
    return FlowField(u=u, v=v)


def generate_noise_flow(dims: tuple, model: NoiseModel, seed) -> FlowField:
    """Per-pixel noise flow: log-normal magnitude, uniform direction, blurred.

    Magnitudes are drawn first, then directions, so the pre-blur magnitude
    stream is reproducible for statistical checks.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h, w = dims
    magnitude = rng.lognormal(mean=model.mu, sigma=model.sigma, size=(h, w))
    direction = rng.uniform(0.0, 2 * np.pi, size=(h, w))
    u = magnitude * np.cos(direction)
    v = magnitude * np.sin(direction)
    if model.blur_sigma > 0:
        u = gaussian_blur(u, model.blur_sigma)
        v = gaussian_blur(v, model.blur_sigma)
    return FlowField(u=u.astype(np.float32), v=v.astype(np.float32))
