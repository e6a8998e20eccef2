"""Deterministic reverse diffusion over a strided timestep subset."""

from __future__ import annotations

import numpy as np

from .. import nn
from ..errors import ContractError
from ..flowcore import FlowField
from .schedule import DiffusionSchedule

DEFAULT_STEPS = 50


def ddim_timesteps(t_count: int, steps: int) -> np.ndarray:
    """Descending strided subset of [1, T] with both endpoints included."""
    if steps < 1 or steps > t_count:
        raise ContractError(f"steps must lie in [1, {t_count}], got {steps}")
    return np.unique(np.round(np.linspace(1, t_count, steps)).astype(np.int64))[::-1]


def sample_magnified_flow(
    model,
    cond,
    alpha: float,
    schedule: DiffusionSchedule,
    steps: int = DEFAULT_STEPS,
    seed: int = 0,
) -> FlowField:
    """Draw a magnified flow for one conditional flow field.

    Starts from seeded standard-normal noise, iterates the deterministic
    update (predict clean flow, reproject the implied noise onto the next
    timestep), and returns the final clean prediction denormalized.
    """
    if isinstance(cond, FlowField):
        cond = np.stack([cond.u, cond.v])
    cond = np.asarray(cond, dtype=np.float64)
    if cond.ndim != 3 or cond.shape[0] != 2:
        raise ContractError(f"conditional flow must be (2, H, W), got {cond.shape}")
    batch = sample_magnified_batch(model, cond[None], np.asarray([alpha]), schedule, steps, seed)
    return FlowField(u=batch[0, 0], v=batch[0, 1])


def sample_magnified_batch(
    model,
    cond: np.ndarray,
    alpha: np.ndarray,
    schedule: DiffusionSchedule,
    steps: int = DEFAULT_STEPS,
    seed: int = 0,
) -> np.ndarray:
    """Batched sampler returning (N, 2, H, W) flows in pixel units."""
    cond = np.asarray(cond)
    n = cond.shape[0]
    timesteps = ddim_timesteps(schedule.t_count, steps)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(cond.shape)
    pred = np.zeros_like(x)
    with nn.no_grad():
        for i, t in enumerate(timesteps):
            pred = model.forward(x, cond, alpha, np.full(n, t, dtype=np.int64)).data
            a_now = schedule.alpha_bar[t]
            implied = (x - np.sqrt(a_now) * pred) / np.sqrt(1.0 - a_now)
            t_next = int(timesteps[i + 1]) if i + 1 < len(timesteps) else 0
            a_next = schedule.alpha_bar[t_next]
            x = np.sqrt(a_next) * pred + np.sqrt(1.0 - a_next) * implied
    return np.asarray(pred, dtype=np.float64) * schedule.f_max
