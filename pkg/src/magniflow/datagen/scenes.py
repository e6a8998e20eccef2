"""Procedural test scenes: textured sprite translating over a textured
background, with analytic ground-truth flows."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ContractError
from ..flowcore import FlowField, ImageBuffer, gaussian_blur, warp_array, write_flo, write_video

SCENE_META_NAME = "scene.json"


@dataclass(frozen=True)
class SceneConfig:
    """Sinusoidal sprite-translation scene.

    The sprite covers an ellipse of the given fractional radius and moves by
    amplitude*sin(2*pi*t/period) pixels along `direction` at frame t; the
    background stays put.
    """

    width: int = 64
    height: int = 64
    frames: int = 16
    amplitude: float = 0.3
    period: float = 16.0
    direction: float = 0.0
    sprite_radius: float = 0.33
    texture_smoothness: float = 1.2

    def __post_init__(self):
        if self.frames < 1:
            raise ContractError(f"frames must be >= 1, got {self.frames}")
        if self.amplitude < 0:
            raise ContractError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.period <= 0:
            raise ContractError(f"period must be > 0, got {self.period}")
        if not (0.05 <= self.sprite_radius <= 0.45):
            raise ContractError("sprite_radius must lie in [0.05, 0.45]")

    def offset(self, t: int) -> tuple:
        disp = self.amplitude * np.sin(2 * np.pi * t / self.period)
        return (disp * np.cos(self.direction), disp * np.sin(self.direction))


def _texture(dims, rng, smoothness, lo=0.08, hi=0.92):
    """Two-octave value noise normalized into [lo, hi]."""
    coarse = gaussian_blur(rng.random(dims), max(smoothness, 0.3) * 2.0)
    fine = gaussian_blur(rng.random(dims), max(smoothness, 0.3))
    mix = coarse + 0.6 * fine
    mix = (mix - mix.min()) / max(mix.max() - mix.min(), 1e-12)
    return lo + (hi - lo) * mix


def sprite_mask(config: SceneConfig) -> np.ndarray:
    h, w = config.height, config.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    r = config.sprite_radius * min(h, w)
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r


def render_frames(config: SceneConfig, seed: int) -> tuple:
    """Render all frames plus per-frame ground-truth flows against frame 0.

    Returns (frames, flows) where flows[t] holds the analytic displacement of
    frame 0's sprite pixels at frame t (zero outside the sprite); flows[0] is
    identically zero.
    """
    rng = np.random.default_rng(seed)
    h, w = config.height, config.width
    background = _texture((h, w), rng, config.texture_smoothness)
    sprite_tex = _texture((h, w), rng, config.texture_smoothness * 0.8, lo=0.05, hi=0.95)
    mask0 = sprite_mask(config).astype(np.float64)
    layer0 = sprite_tex * mask0

    frames = []
    flows = []
    for t in range(config.frames):
        ox, oy = config.offset(t)
        if ox == 0.0 and oy == 0.0:
            layer, alpha = layer0, mask0
        else:
            # content moves by +o: sample the layer at p - o
            layer = warp_array(layer0, np.full((h, w), -ox), np.full((h, w), -oy))
            alpha = warp_array(mask0, np.full((h, w), -ox), np.full((h, w), -oy))
        composite = background * (1.0 - alpha) + layer
        frames.append(ImageBuffer(np.clip(composite, 0.0, 1.0).astype(np.float32)[:, :, None]))
        u = np.where(mask0 > 0.5, np.float32(ox), np.float32(0.0))
        v = np.where(mask0 > 0.5, np.float32(oy), np.float32(0.0))
        flows.append(FlowField(u=u, v=v))
    return frames, flows


def render_synthetic_video(config: SceneConfig, seed: int, out_dir) -> str:
    """Write frames/, flows/ (ground truth vs frame 0), and scene.json."""
    frames, flows = render_frames(config, seed)
    os.makedirs(out_dir, exist_ok=True)
    write_video(os.path.join(out_dir, "frames"), frames)
    flow_dir = os.path.join(out_dir, "flows")
    os.makedirs(flow_dir, exist_ok=True)
    for t in range(1, len(flows)):
        write_flo(os.path.join(flow_dir, f"flow_{t + 1:06d}.flo"), flows[t])
    meta = {"seed": int(seed), "config": asdict(config)}
    meta_path = os.path.join(out_dir, SCENE_META_NAME)
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return str(out_dir)


def load_scene(scene_dir) -> tuple:
    """(SceneConfig, seed) recorded in a scene directory."""
    path = os.path.join(scene_dir, SCENE_META_NAME)
    if not os.path.isfile(path):
        raise ContractError(f"{scene_dir}: missing {SCENE_META_NAME}")
    with open(path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return SceneConfig(**meta["config"]), int(meta["seed"])
