"""Diffusion flow magnifier: conditioning, schedule, denoiser, sampler, training."""

from .features import (
    DEFAULT_ALPHA_MAX,
    DEFAULT_K,
    harmonic_alpha_features,
    timestep_embedding,
)
from .model import (
    DESK_WIDTHS,
    FULL_WIDTHS,
    NEIGHBORS,
    UPSAMPLE,
    WEIGHT_CHANNELS,
    MagnifierModel,
    convex_upsample,
)
from .sampler import DEFAULT_STEPS, ddim_timesteps, sample_magnified_batch, sample_magnified_flow
from .schedule import (
    DEFAULT_F_MAX,
    DEFAULT_T,
    DESK_T,
    DiffusionSchedule,
    make_schedule,
    q_sample,
)
from .training import (
    CHECKPOINT_NAME,
    LOSS_CSV,
    RealSceneFlowSource,
    SyntheticFlowSource,
    TrainResult,
    load_magnifier,
    magnifier_loss,
    save_magnifier,
    step_seed,
    train_magnifier,
    train_step,
)

__all__ = [
    "CHECKPOINT_NAME",
    "DEFAULT_ALPHA_MAX",
    "DEFAULT_F_MAX",
    "DEFAULT_K",
    "DEFAULT_STEPS",
    "DEFAULT_T",
    "DESK_T",
    "DESK_WIDTHS",
    "DiffusionSchedule",
    "FULL_WIDTHS",
    "LOSS_CSV",
    "MagnifierModel",
    "NEIGHBORS",
    "RealSceneFlowSource",
    "SyntheticFlowSource",
    "TrainResult",
    "UPSAMPLE",
    "WEIGHT_CHANNELS",
    "convex_upsample",
    "ddim_timesteps",
    "harmonic_alpha_features",
    "load_magnifier",
    "magnifier_loss",
    "make_schedule",
    "q_sample",
    "sample_magnified_batch",
    "sample_magnified_flow",
    "save_magnifier",
    "step_seed",
    "timestep_embedding",
    "train_magnifier",
    "train_step",
]
