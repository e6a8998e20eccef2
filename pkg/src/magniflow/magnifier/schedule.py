"""Cosine diffusion schedule and the forward noising process."""

from __future__ import annotations

import dataclasses

import numpy as np

from ..errors import ContractError

DEFAULT_T = 1000
DESK_T = 200
DEFAULT_F_MAX = 32.0
_COSINE_OFFSET = 0.008
_BETA_CAP = 0.999


@dataclasses.dataclass(frozen=True)
class DiffusionSchedule:
    """Noise schedule: betas indexed by t-1, alpha_bar indexed by t (0..T).

    ``f_max`` is the flow normalization constant in pixels; flows divide
    by it on the way into the diffusion space and multiply on the way out.
    """

    t_count: int
    betas: np.ndarray
    alpha_bar: np.ndarray
    f_max: float

    def __post_init__(self):
        if self.t_count < 2:
            raise ContractError(f"schedule needs at least 2 steps, got {self.t_count}")
        if self.f_max <= 0:
            raise ContractError(f"f_max must be positive, got {self.f_max}")
        if self.betas.shape != (self.t_count,) or self.alpha_bar.shape != (self.t_count + 1,):
            raise ContractError("schedule array lengths inconsistent with t_count")
        if not ((self.betas > 0).all() and (self.betas < 1).all()):
            raise ContractError("betas must lie strictly inside (0, 1)")
        if (np.diff(self.alpha_bar) >= 0).any():
            raise ContractError("alpha_bar must decrease strictly")


def make_schedule(
    t_count: int = DEFAULT_T, f_max: float = DEFAULT_F_MAX, offset: float = _COSINE_OFFSET
) -> DiffusionSchedule:
    """Cosine cumulative schedule with per-step betas capped at 0.999."""
    if t_count < 2:
        raise ContractError(f"t_count must be >= 2, got {t_count}")
    t = np.arange(t_count + 1, dtype=np.float64)
    f = np.cos((t / t_count + offset) / (1.0 + offset) * np.pi / 2.0) ** 2
    raw = f / f[0]
    betas = np.clip(1.0 - raw[1:] / raw[:-1], 1e-8, _BETA_CAP)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return DiffusionSchedule(t_count=t_count, betas=betas, alpha_bar=alpha_bar, f_max=float(f_max))


def _gather_alpha_bar(schedule: DiffusionSchedule, t) -> np.ndarray:
    steps = np.atleast_1d(np.asarray(t))
    if not np.issubdtype(steps.dtype, np.integer):
        raise ContractError("timesteps must be integers")
    if (steps < 1).any() or (steps > schedule.t_count).any():
        raise ContractError(f"timesteps must lie in [1, {schedule.t_count}]")
    return schedule.alpha_bar[steps]


def q_sample(x0: np.ndarray, t, noise: np.ndarray, schedule: DiffusionSchedule) -> np.ndarray:
    """Noise normalized flows forward: sqrt(a_bar) x0 + sqrt(1 - a_bar) eps.

    ``x0`` and ``noise`` are (N, 2, H, W); ``t`` is (N,) integers in [1, T].
    """
    x0 = np.asarray(x0)
    noise = np.asarray(noise)
    if x0.shape != noise.shape or x0.ndim != 4:
        raise ContractError("x0 and noise must share an (N, 2, H, W) shape")
    a_bar = _gather_alpha_bar(schedule, t).reshape(-1, 1, 1, 1)
    if a_bar.shape[0] != x0.shape[0]:
        raise ContractError("one timestep per batch sample required")
    return np.sqrt(a_bar) * x0 + np.sqrt(1.0 - a_bar) * noise
