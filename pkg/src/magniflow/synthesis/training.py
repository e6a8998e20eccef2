"""Synthesizer training: paired-frame batches, combined loss, persistence."""

from __future__ import annotations

import csv
import dataclasses
import os

import numpy as np

from .. import nn
from ..errors import CheckpointError, ContractError
from ..flowcore import ImageBuffer
from ..flowcore.metrics import psnr
from ..nn import step_seed
from .model import SynthesisModel, synthesize_frame
from .pyramid import num_scales
from .style import StyleExtractor, style_loss

LOSS_CSV = "fvs_loss.csv"
CHECKPOINT_NAME = "fvs.ckpt"
DEFAULT_LAMBDA_L1 = 1.0
DEFAULT_LAMBDA_STYLE = 40.0


def _frame_chw(frame) -> np.ndarray:
    arr = np.asarray(frame.data if hasattr(frame, "data") else frame, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    chw = np.moveaxis(arr, -1, 0)
    if chw.shape[0] == 1:
        chw = np.repeat(chw, 3, axis=0)
    return chw


class FramePairSource:
    """(reference, target, flow) batches from rendered scenes.

    Each scene contributes the pairs (frame 0, frame t, flow to frame t) for
    every t >= 1; the flows are the clean analytic fields the renderer wrote.
    """

    name = "scenes"

    def __init__(self, scenes):
        self.pairs = []
        for frames, flows in scenes:
            ref = _frame_chw(frames[0])
            for t in range(1, len(frames)):
                self.pairs.append(
                    (ref, _frame_chw(frames[t]), np.stack([flows[t].u, flows[t].v]).astype(np.float64))
                )
        if not self.pairs:
            raise ContractError("no frame pairs available")

    def draw(self, rng: np.random.Generator, batch_size: int):
        picks = rng.integers(0, len(self.pairs), size=batch_size)
        refs, targets, flows = zip(*(self.pairs[int(i)] for i in picks))
        return np.stack(refs), np.stack(targets), np.stack(flows)


def fvs_train_step(
    model: SynthesisModel,
    extractor: StyleExtractor,
    batch,
    *,
    lam_l1: float = DEFAULT_LAMBDA_L1,
    lam_style: float = DEFAULT_LAMBDA_STYLE,
    lr: float,
    weight_decay: float = 0.01,
    levels=None,
    step_index: int = 0,
    decoder_override: bool = False,
) -> tuple:
    """One optimizer step on lam_l1 * L1 + lam_style * L_G; returns all three.

    ``decoder_override`` severs every parameter from the graph (the output
    is pure warping), so the losses are computed but no update happens.
    """
    refs, targets, flows = batch
    if levels is None:
        levels = num_scales(refs.shape[2], refs.shape[3])
    pred = model.forward(refs, flows, levels=levels, decoder_override=decoder_override)
    target_t = nn.Tensor(np.asarray(targets))
    l1 = nn.reduce_mean(nn.absolute(nn.add(pred, nn.mul(target_t, -1.0))))
    lg = style_loss(pred, target_t, extractor)
    loss = nn.add(nn.mul(l1, float(lam_l1)), nn.mul(lg, float(lam_style)))
    values = (l1.item(), lg.item(), loss.item())
    if not all(np.isfinite(v) for v in values):
        raise ContractError(
            f"non-finite synthesis loss at step {step_index}: "
            f"l1={values[0]:.3g}, style={values[1]:.3g}, "
            f"|flow|={np.abs(flows).max():.3g}"
        )
    if decoder_override:
        return values
    model.params.zero_grad()
    nn.backward(loss)
    nn.adamw_step(model.params, lr=lr, weight_decay=weight_decay)
    return values


@dataclasses.dataclass
class SynthTrainResult:
    steps_run: int
    final_loss: float
    checkpoint_path: str
    loss_csv: str
    stopped_early: bool = False


def save_synthesizer(path, model: SynthesisModel, style_seed: int, step: int):
    config = {"model": model.config_dict(), "style_seed": int(style_seed)}
    nn.save_checkpoint(path, model.params, seed=model.seed, step=step, config=config)


def load_synthesizer(path):
    """Rebuild (model, extractor, step) from a checkpoint archive."""
    ckpt = nn.load_checkpoint(path)
    if "model" not in ckpt.config or "style_seed" not in ckpt.config:
        raise CheckpointError(f"{path}: not a synthesizer checkpoint")
    model = SynthesisModel.from_config(ckpt.config["model"])
    ckpt.restore(model.params)
    return model, StyleExtractor(seed=int(ckpt.config["style_seed"])), ckpt.step


def evaluate_synthesizer(model: SynthesisModel, pairs, levels=None) -> float:
    """Mean PSNR of synthesized frames over (ref, target, flow) CHW triples."""
    scores = []
    for ref, target, flow in pairs:
        frame = synthesize_frame(model, np.moveaxis(ref, 0, -1), flow, levels=levels)
        truth = ImageBuffer(np.clip(np.moveaxis(target, 0, -1), 0.0, 1.0))
        scores.append(psnr(frame, truth))
    return float(np.mean(scores))


def train_synthesizer(
    model: SynthesisModel,
    extractor: StyleExtractor,
    sources,
    *,
    steps: int,
    batch_size: int = 2,
    lr: float = 2e-4,
    weight_decay: float = 0.01,
    lam_l1: float = DEFAULT_LAMBDA_L1,
    lam_style: float = DEFAULT_LAMBDA_STYLE,
    seed: int = 0,
    out_dir,
    log_every: int = 25,
    eval_every: int = 0,
    early_stop=None,
    resume_from=None,
) -> SynthTrainResult:
    """Round-robin training loop with counter-based per-step randomness.

    Shares the magnifier trainer's contract: resuming from a mid-run
    checkpoint continues bit-identically, and ``early_stop(step, model)``
    may end the run at any ``eval_every`` boundary.
    """
    if not sources:
        raise ContractError("at least one batch source is required")
    os.makedirs(out_dir, exist_ok=True)
    checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
    csv_path = os.path.join(out_dir, LOSS_CSV)

    start_step = 0
    if resume_from is not None:
        restored, _, start_step = load_synthesizer(resume_from)
        model.params.load_state_arrays(
            restored.params.state_arrays(), restored.params.step_count
        )

    mode = "a" if (resume_from is not None and os.path.exists(csv_path)) else "w"
    total = float("nan")
    stopped = False
    with open(csv_path, mode, newline="") as handle:
        writer = csv.writer(handle)
        if mode == "w":
            writer.writerow(["step", "l1", "style", "total", "source"])
        step = start_step
        for step in range(start_step + 1, steps + 1):
            rng = step_seed(seed, step)
            source = sources[(step - 1) % len(sources)]
            batch = source.draw(rng, batch_size)
            l1, lg, total = fvs_train_step(
                model,
                extractor,
                batch,
                lam_l1=lam_l1,
                lam_style=lam_style,
                lr=lr,
                weight_decay=weight_decay,
                step_index=step,
            )
            if step % max(log_every, 1) == 0 or step == steps:
                writer.writerow([step, f"{l1:.6f}", f"{lg:.6g}", f"{total:.6f}", source.name])
            if eval_every and early_stop is not None and step % eval_every == 0:
                if early_stop(step, model):
                    stopped = True
                    break
    save_synthesizer(checkpoint_path, model, extractor.seed, step)
    return SynthTrainResult(
        steps_run=step,
        final_loss=total,
        checkpoint_path=checkpoint_path,
        loss_csv=csv_path,
        stopped_early=stopped,
    )
