"""End-to-end magnification: frames in, magnified frames and flows out.

Ties the diffusion flow magnifier and the frame synthesizer together. Each
output frame t comes from one reference/query pair: the conditional flow is
estimated (or loaded), the magnifier samples the amplified field, and the
synthesizer warps the reference by the negated amplified flow to emit the
frame. alpha = 1 reproduces the input motion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .flowcore import FlowField, ImageBuffer, estimate_flow, read_flo, read_video
from .magnifier import sample_magnified_batch
from .synthesis import num_scales, synthesize_frame

PAD_MULTIPLE = 8
PAIR_MODES = ("static", "dynamic")
FLOW_SOURCES = ("internal", "flo")


def pair_indices(count: int, mode: str) -> list:
    """Reference/query index pairs for a sequence of `count` frames.

    static anchors every pair at frame 0, so amplified motion accumulates
    against a fixed reference; dynamic pairs consecutive frames.
    """
    if mode not in PAIR_MODES:
        raise ContractError(f"mode must be one of {PAIR_MODES}, got {mode!r}")
    if count < 2:
        raise ContractError(f"need at least 2 frames, got {count}")
    if mode == "static":
        return [(0, t) for t in range(1, count)]
    return [(t - 1, t) for t in range(1, count)]


def _pad_amounts(height: int, width: int, multiple: int = PAD_MULTIPLE) -> tuple:
    ph = (-height) % multiple
    pw = (-width) % multiple
    return ph, pw


def _pad_image(frame: ImageBuffer, ph: int, pw: int) -> ImageBuffer:
    if ph == 0 and pw == 0:
        return frame
    data = np.pad(frame.data, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return ImageBuffer(data)


def _pad_flow(flow: FlowField, ph: int, pw: int) -> FlowField:
    if ph == 0 and pw == 0:
        return flow
    u = np.pad(flow.u, ((0, ph), (0, pw)), mode="reflect")
    v = np.pad(flow.v, ((0, ph), (0, pw)), mode="reflect")
    return FlowField(u=u, v=v)


def _crop_flow(flow: FlowField, height: int, width: int) -> FlowField:
    return FlowField(u=flow.u[:height, :width], v=flow.v[:height, :width])


def load_conditional_flows(paths, height: int, width: int) -> list:
    """Read precomputed .flo pairs and check their size against the frames."""
    flows = []
    for p in paths:
        f = read_flo(p)
        if (f.height, f.width) != (height, width):
            raise ContractError(
                f"{p}: flow is {f.height}x{f.width}, frames are {height}x{width}"
            )
        flows.append(f)
    return flows


def pair_seed(seed: int, pair_index: int) -> int:
    """Deterministic per-pair sampler seed decoupled across frames."""
    return int(np.random.SeedSequence([seed, pair_index]).generate_state(1)[0])


@dataclass
class MagnifyResult:
    """Frames plus both flow stages for each reference/query pair."""

    frames: list = field(default_factory=list)
    cond_flows: list = field(default_factory=list)
    mag_flows: list = field(default_factory=list)

    def __len__(self):
        return len(self.frames)


def magnify_video(
    frames,
    alpha: float,
    magnifier,
    schedule,
    synthesizer,
    *,
    mode: str = "static",
    cond_flows=None,
    sample_steps: int = 50,
    seed: int = 0,
) -> MagnifyResult:
    """Magnify a frame sequence, returning N-1 frames and their flows.

    frames is a list of ImageBuffers sharing one size. cond_flows, when
    given, must hold one FlowField per pair (precomputed conditionals);
    otherwise flows are estimated from the frames. Inputs are never
    modified. Internally everything is padded by reflection to a multiple
    of 8 and cropped back, so arbitrary frame sizes work.
    """
    dims = {(f.height, f.width) for f in frames}
    if len(dims) != 1:
        raise ContractError(f"frame size mismatch: {sorted(dims)}")
    if alpha < 0:
        raise ContractError(f"alpha must be >= 0, got {alpha}")
    (height, width) = dims.pop()
    pairs = pair_indices(len(frames), mode)

    if cond_flows is not None:
        if len(cond_flows) != len(pairs):
            raise ContractError(
                f"need {len(pairs)} conditional flows for {len(frames)} frames, "
                f"got {len(cond_flows)}"
            )
        for f in cond_flows:
            if (f.height, f.width) != (height, width):
                raise ContractError(
                    f"flow is {f.height}x{f.width}, frames are {height}x{width}"
                )

    ph, pw = _pad_amounts(height, width)
    padded = [_pad_image(f, ph, pw) for f in frames]
    levels = num_scales(height + ph, width + pw)

    result = MagnifyResult()
    for k, (ref_idx, cur_idx) in enumerate(pairs):
        if cond_flows is None:
            cond = estimate_flow(padded[ref_idx], padded[cur_idx])
        else:
            cond = _pad_flow(cond_flows[k], ph, pw)
        cond_chw = np.stack([cond.u, cond.v])
        mag = sample_magnified_batch(
            magnifier,
            cond_chw[None],
            np.asarray([alpha], dtype=np.float64),
            schedule,
            steps=sample_steps,
            seed=pair_seed(seed, k),
        )
        mag_field = FlowField(u=mag[0, 0], v=mag[0, 1])
        frame = synthesize_frame(synthesizer, padded[ref_idx], mag_field, levels=levels)
        result.frames.append(ImageBuffer(frame.data[:height, :width]))
        result.cond_flows.append(_crop_flow(cond, height, width))
        result.mag_flows.append(_crop_flow(mag_field, height, width))
    return result


def magnify_directory(
    frames_dir,
    alpha: float,
    magnifier,
    schedule,
    synthesizer,
    *,
    mode: str = "static",
    flo_paths=None,
    sample_steps: int = 50,
    seed: int = 0,
) -> tuple:
    """Directory-level wrapper: load frames (and optional flows), magnify.

    Returns (result, frame_count). With flo_paths the file count must be
    exactly frames - 1, matching the pair count for either mode.
    """
    frames = read_video(frames_dir)
    cond = None
    if flo_paths is not None:
        if len(flo_paths) != len(frames) - 1:
            raise ContractError(
                f"{len(frames)} frames need {len(frames) - 1} .flo files, "
                f"got {len(flo_paths)}"
            )
        cond = load_conditional_flows(flo_paths, frames[0].height, frames[0].width)
    result = magnify_video(
        frames,
        alpha,
        magnifier,
        schedule,
        synthesizer,
        mode=mode,
        cond_flows=cond,
        sample_steps=sample_steps,
        seed=seed,
    )
    return result, len(frames)
