"""Training loop for the flow magnifier: batching, stepping, persistence."""

from __future__ import annotations

import csv
import dataclasses
import os

import numpy as np

from .. import nn
from ..datagen import load_manifest
from ..errors import CheckpointError, ContractError
from ..flowcore import read_flo
from ..flowcore.lucas_kanade import estimate_flow
from ..nn import step_seed
from .model import MagnifierModel
from .schedule import DiffusionSchedule, make_schedule, q_sample

LOSS_CSV = "dmm_loss.csv"
CHECKPOINT_NAME = "dmm.ckpt"


def _chw(field) -> np.ndarray:
    """FlowField as the channel-first (2, H, W) layout the model consumes."""
    return np.stack([field.u, field.v])


def magnifier_loss(model, schedule, cond, target, alpha, t, noise) -> nn.Tensor:
    """Mean absolute error between the predicted and true normalized flows.

    Only the diffusion state and the target live in f_max-normalized space;
    the conditional enters in pixel units so sub-pixel motion keeps a usable
    magnitude relative to the unit-variance noise channels.
    """
    x0 = np.asarray(target) / schedule.f_max
    x_t = q_sample(x0, t, noise, schedule)
    pred = model.forward(x_t, np.asarray(cond), alpha, t)
    return nn.reduce_mean(nn.absolute(nn.add(pred, nn.mul(nn.Tensor(x0), -1.0))))


def train_step(
    model: MagnifierModel,
    schedule: DiffusionSchedule,
    batch,
    *,
    lr: float,
    weight_decay: float = 0.01,
    rng: np.random.Generator,
    step_index: int = 0,
) -> float:
    """One optimizer step on a (cond, target, alpha) batch in pixel units."""
    cond, target, alpha = batch
    n = cond.shape[0]
    t = rng.integers(1, schedule.t_count + 1, size=n)
    noise = rng.standard_normal(np.asarray(target).shape)
    loss = magnifier_loss(model, schedule, cond, target, alpha, t, noise)
    value = loss.item()
    if not np.isfinite(value):
        raise ContractError(
            f"non-finite loss at step {step_index}: t={t.tolist()}, "
            f"|cond|={np.abs(cond).max():.3g}, |target|={np.abs(target).max():.3g}"
        )
    model.params.zero_grad()
    nn.backward(loss)
    nn.adamw_step(model.params, lr=lr, weight_decay=weight_decay)
    return value


class SyntheticFlowSource:
    """Draws (cond, target, alpha) batches from a generated dataset directory."""

    name = "synthetic"

    def __init__(self, dataset_dir):
        self.manifest = load_manifest(dataset_dir)
        self.records = self.manifest["samples"]
        if not self.records:
            raise ContractError(f"dataset at {dataset_dir} holds no samples")
        self._dir = self.manifest["_dir"]
        self._cache: dict = {}

    def _load(self, index: int):
        if index not in self._cache:
            record = self.records[index]
            cond = read_flo(os.path.join(self._dir, record["conditional"]))
            targ = read_flo(os.path.join(self._dir, record["target"]))
            self._cache[index] = (_chw(cond), _chw(targ), float(record["alpha"]))
        return self._cache[index]

    def draw(self, rng: np.random.Generator, batch_size: int):
        picks = rng.integers(0, len(self.records), size=batch_size)
        conds, targets, alphas = [], [], []
        for index in picks:
            cond, targ, alpha = self._load(int(index))
            conds.append(cond)
            targets.append(targ)
            alphas.append(alpha)
        return np.stack(conds), np.stack(targets), np.asarray(alphas)


class RealSceneFlowSource:
    """Estimated flows from rendered frame sequences with analytic targets.

    The conditional flow comes from the pyramid tracker on adjacent
    frames (estimation noise included); the target is the clean analytic
    flow scaled by a freshly drawn magnification.
    """

    name = "real"

    def __init__(self, scenes, alpha_max: float = 100.0):
        # scenes: list of (frames, flows) as produced by render_frames
        self.pairs = []
        for frames, flows in scenes:
            for t in range(1, len(frames)):
                self.pairs.append((frames[t - 1], frames[t], flows[t]))
        if not self.pairs:
            raise ContractError("no frame pairs available for flow estimation")
        self.alpha_max = float(alpha_max)
        self._cache: dict = {}

    def _estimate(self, index: int):
        if index not in self._cache:
            prev, cur, _ = self.pairs[index]
            self._cache[index] = _chw(estimate_flow(prev, cur))
        return self._cache[index]

    def draw(self, rng: np.random.Generator, batch_size: int):
        picks = rng.integers(0, len(self.pairs), size=batch_size)
        conds, targets, alphas = [], [], []
        for index in picks:
            cond = self._estimate(int(index))
            gt = _chw(self.pairs[int(index)][2])
            alpha = float(rng.uniform(0.0, self.alpha_max))
            conds.append(cond)
            targets.append(alpha * gt)
            alphas.append(alpha)
        return np.stack(conds), np.stack(targets), np.asarray(alphas)


@dataclasses.dataclass
class TrainResult:
    steps_run: int
    final_loss: float
    checkpoint_path: str
    loss_csv: str
    stopped_early: bool = False


def save_magnifier(path, model: MagnifierModel, schedule: DiffusionSchedule, step: int):
    config = {"model": model.config_dict(), "t_count": schedule.t_count, "f_max": schedule.f_max}
    nn.save_checkpoint(path, model.params, seed=model.seed, step=step, config=config)


def load_magnifier(path):
    """Rebuild (model, schedule, step) from a checkpoint archive."""
    ckpt = nn.load_checkpoint(path)
    config = ckpt.config
    if "model" not in config or "t_count" not in config:
        raise CheckpointError(f"{path}: not a magnifier checkpoint")
    model = MagnifierModel.from_config(config["model"])
    ckpt.restore(model.params)
    schedule = make_schedule(int(config["t_count"]), float(config["f_max"]))
    return model, schedule, ckpt.step


def train_magnifier(
    model: MagnifierModel,
    schedule: DiffusionSchedule,
    sources,
    *,
    steps: int,
    batch_size: int = 4,
    lr: float = 2e-4,
    weight_decay: float = 0.01,
    seed: int = 0,
    out_dir,
    log_every: int = 25,
    eval_every: int = 0,
    early_stop=None,
    resume_from=None,
) -> TrainResult:
    """Run the training loop, alternating over ``sources`` round-robin.

    Per-step randomness is derived from (seed, step), so resuming from a
    checkpoint written at step k continues bit-identically with the run
    that never stopped. ``early_stop(step, model)`` may end the run at an
    ``eval_every`` boundary once its criterion is met.
    """
    if not sources:
        raise ContractError("at least one batch source is required")
    os.makedirs(out_dir, exist_ok=True)
    checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
    csv_path = os.path.join(out_dir, LOSS_CSV)

    start_step = 0
    if resume_from is not None:
        restored, _, start_step = load_magnifier(resume_from)
        model.params.load_state_arrays(
            restored.params.state_arrays(), restored.params.step_count
        )

    mode = "a" if (resume_from is not None and os.path.exists(csv_path)) else "w"
    loss_value = float("nan")
    stopped = False
    with open(csv_path, mode, newline="") as handle:
        writer = csv.writer(handle)
        if mode == "w":
            writer.writerow(["step", "loss", "source"])
        step = start_step
        for step in range(start_step + 1, steps + 1):
            rng = step_seed(seed, step)
            source = sources[(step - 1) % len(sources)]
            batch = source.draw(rng, batch_size)
            loss_value = train_step(
                model,
                schedule,
                batch,
                lr=lr,
                weight_decay=weight_decay,
                rng=rng,
                step_index=step,
            )
            if step % max(log_every, 1) == 0 or step == steps:
                writer.writerow([step, f"{loss_value:.6f}", source.name])
            if eval_every and early_stop is not None and step % eval_every == 0:
                if early_stop(step, model):
                    stopped = True
                    break
    save_magnifier(checkpoint_path, model, schedule, step)
    return TrainResult(
        steps_run=step,
        final_loss=loss_value,
        checkpoint_path=checkpoint_path,
        loss_csv=csv_path,
        stopped_early=stopped,
    )
