"""Synthetic training data: shaped motion regions with calibrated noise,
photon-noise statistics, and procedural evaluation scenes."""

from .dataset import (
    DatasetConfig,
    SyntheticFlowSample,
    dataset_config_from_manifest,
    generate_dataset,
    generate_sample,
    load_manifest,
    sample_mask_union,
    sample_seed,
)
from .flows import (
    compose_conditional_flow,
    generate_noise_flow,
    make_target_flow,
    sample_directions,
)
from .masks import SHAPE_FAMILIES, RegionSpec, generate_mask, sample_region
from .noise import (
    DEFAULT_MU,
    DEFAULT_SIGMA,
    NoiseModel,
    fit_lognormal_mle,
    photon_noise_field,
    simulate_photon_noise,
)
from .scenes import SceneConfig, load_scene, render_frames, render_synthetic_video, sprite_mask

__all__ = [
    "DEFAULT_MU",
    "DEFAULT_SIGMA",
    "SHAPE_FAMILIES",
    "DatasetConfig",
    "NoiseModel",
    "RegionSpec",
    "SceneConfig",
    "SyntheticFlowSample",
    "compose_conditional_flow",
    "dataset_config_from_manifest",
    "fit_lognormal_mle",
    "generate_dataset",
    "generate_mask",
    "generate_noise_flow",
    "generate_sample",
    "load_manifest",
    "load_scene",
    "make_target_flow",
    "photon_noise_field",
    "render_frames",
    "render_synthetic_video",
    "sample_directions",
    "sample_mask_union",
    "sample_region",
    "sample_seed",
    "simulate_photon_noise",
    "sprite_mask",
]
