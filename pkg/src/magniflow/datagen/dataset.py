"""Synthetic flow-pair dataset generation: sampling, files, manifest."""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import ContractError
from ..flowcore import FlowField, write_flo
from .flows import compose_conditional_flow, generate_noise_flow, make_target_flow, sample_directions
from .masks import generate_mask, sample_region
from .noise import NoiseModel

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = 1


@dataclass(frozen=True)
class DatasetConfig:
    """Everything that shapes one synthetic sample, minus the seed."""

    width: int = 64
    height: int = 64
    regions: int = 5
    segments: int = 36
    m_min: float = 0.0
    m_max: float = 0.3
    alpha_min: float = 0.0
    alpha_max: float = 100.0
    scale_min: float = 4.0
    scale_max: float = 12.0
    noise_mu: float = -4.303
    noise_sigma: float = 0.527
    noise_blur_sigma: float = 3.0

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ContractError("field dims must be at least 8x8")
        if not (1 <= self.regions <= self.segments):
            raise ContractError(
                f"need 1 <= regions <= segments, got {self.regions}/{self.segments}"
            )
        if not (0 <= self.m_min <= self.m_max):
            raise ContractError("need 0 <= m_min <= m_max")
        if not (0 <= self.alpha_min <= self.alpha_max):
            raise ContractError("need 0 <= alpha_min <= alpha_max")
        if not (0 < self.scale_min <= self.scale_max):
            raise ContractError("need 0 < scale_min <= scale_max")

    @property
    def dims(self) -> tuple:
        return (self.height, self.width)

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.noise_mu, self.noise_sigma, self.noise_blur_sigma)


@dataclass(frozen=True)
class SyntheticFlowSample:
    """One conditional/target pair with the metadata that reproduces it."""

    conditional: FlowField
    target: FlowField
    union_mask: np.ndarray
    alpha: float
    regions: list
    seed: int


def sample_seed(master_seed: int, index: int) -> int:
    """Counter-derived 64-bit per-sample seed, independent of worker layout."""
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def generate_sample(config: DatasetConfig, seed: int) -> SyntheticFlowSample:
    """Build one sample from its own seed; draw order is frozen for
    reproducibility: directions, regions (shape, placement, magnitude),
    alpha, then the noise field."""
    rng = np.random.default_rng(seed)
    directions = sample_directions(config.regions, config.segments, rng)
    regions = []
    centers = []
    for theta in directions:
        magnitude = float(rng.uniform(config.m_min, config.m_max))
        region = sample_region(
            rng,
            config.dims,
            direction=float(theta),
            magnitude=magnitude,
            scale_range=(config.scale_min, config.scale_max),
            existing_centers=centers,
        )
        regions.append(region)
        centers.append(region.center)
    conditional, union = compose_conditional_flow(regions, config.dims)
    alpha = float(rng.uniform(config.alpha_min, config.alpha_max))
    target = make_target_flow(conditional, union, alpha)
    noise = generate_noise_flow(config.dims, config.noise_model(), rng)
    cond_u = np.where(union, conditional.u, noise.u)
    cond_v = np.where(union, conditional.v, noise.v)
    return SyntheticFlowSample(
        conditional=FlowField(u=cond_u, v=cond_v),
        target=target,
        union_mask=union,
        alpha=alpha,
        regions=regions,
        seed=int(seed),
    )


def _write_one(args):
    out_dir, config, index, seed = args
    sample = generate_sample(config, seed)
    cond_name = f"sample_{index:06d}_cond.flo"
    targ_name = f"sample_{index:06d}_targ.flo"
    write_flo(os.path.join(out_dir, cond_name), sample.conditional)
    write_flo(os.path.join(out_dir, targ_name), sample.target)
    return {
        "index": index,
        "seed": seed,
        "alpha": sample.alpha,
        "conditional": cond_name,
        "target": targ_name,
        "coverage": float(sample.union_mask.mean()),
        "regions": [r.to_json() for r in sample.regions],
    }


def generate_dataset(count: int, config: DatasetConfig, seed: int, out_dir, workers: int = 1):
    """Write `count` conditional/target .flo pairs plus a manifest.

    Per-sample seeds derive from (seed, index), so the same call produces
    bit-identical files no matter how many workers run.
    """
    if count < 1:
        raise ContractError(f"count must be >= 1, got {count}")
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(str(out_dir), config, i, sample_seed(seed, i)) for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_write_one, jobs, chunksize=8))
    else:
        records = [_write_one(job) for job in jobs]
    records.sort(key=lambda r: r["index"])
    manifest = {
        "format": MANIFEST_FORMAT,
        "kind": "flow-pairs",
        "seed": int(seed),
        "count": count,
        "config": asdict(config),
        "samples": records,
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def load_manifest(path) -> dict:
    directory = path
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    else:
        directory = os.path.dirname(path)
    if not os.path.isfile(path):
        raise ContractError(f"{path}: manifest not found")
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ContractError(f"{path}: unsupported manifest format {manifest.get('format')}")
    manifest["_dir"] = directory
    return manifest


def dataset_config_from_manifest(manifest: dict) -> DatasetConfig:
    cfg = {k: v for k, v in manifest["config"].items()}
    return replace(DatasetConfig(), **cfg)


def sample_mask_union(record: dict, dims: tuple) -> np.ndarray:
    """Rebuild the union mask of a manifest record from its region metadata."""
    from .masks import RegionSpec

    union = np.zeros(dims, dtype=bool)
    for obj in record["regions"]:
        union |= generate_mask(RegionSpec.from_json(obj), dims)
    return union
