"""Synthesizer training loop: losses, persistence, resume determinism."""

import csv

import numpy as np
import pytest

from magniflow.datagen.scenes import SceneConfig, render_frames
from magniflow.errors import ContractError
from magniflow.nn import step_seed
from magniflow.synthesis import (
    FramePairSource,
    StyleExtractor,
    SynthesisModel,
    evaluate_synthesizer,
    fvs_train_step,
    load_synthesizer,
    train_synthesizer,
)

TINY = (4, 8, 8)


@pytest.fixture(scope="module")
def scene_source():
    scenes = [
        render_frames(
            SceneConfig(width=64, height=64, frames=5, amplitude=1.5, period=5.0, direction=0.9),
            seed=21,
        ),
        render_frames(
            SceneConfig(width=64, height=64, frames=5, amplitude=2.0, period=4.0, direction=2.4),
            seed=22,
        ),
    ]
    return FramePairSource(scenes)


def test_pair_enumeration(scene_source):
    assert len(scene_source.pairs) == 8  # two scenes, frames 1..4 each
    refs, targets, flows = scene_source.draw(np.random.default_rng(0), 3)
    assert refs.shape == (3, 3, 64, 64)
    assert targets.shape == (3, 3, 64, 64)
    assert flows.shape == (3, 2, 64, 64)


def test_style_weight_zero_reduces_to_l1(scene_source):
    model = SynthesisModel(widths=TINY, seed=0)
    ext = StyleExtractor(seed=0)
    batch = scene_source.draw(np.random.default_rng(1), 2)
    l1, lg, total = fvs_train_step(model, ext, batch, lam_style=0.0, lr=2e-4)
    assert total == l1
    assert lg >= 0.0


def test_override_identity_batch_zeroes_all_losses(scene_source):
    model = SynthesisModel(widths=TINY, seed=1)
    ext = StyleExtractor(seed=0)
    refs, _, _ = scene_source.draw(np.random.default_rng(2), 2)
    batch = (refs, refs.copy(), np.zeros((2, 2, 64, 64)))
    before = {n: a.copy() for n, a in model.params.state_arrays().items()}
    l1, lg, total = fvs_train_step(
        model, ext, batch, lam_l1=1.0, lam_style=1.0, lr=2e-4, decoder_override=True
    )
    assert l1 == 0.0 and lg == 0.0 and total == 0.0
    after = model.params.state_arrays()
    assert all(np.array_equal(a, after[n]) for n, a in before.items())


def test_overfit_single_batch(scene_source):
    model = SynthesisModel(widths=TINY, seed=2)
    ext = StyleExtractor(seed=0)
    batch = scene_source.draw(np.random.default_rng(3), 2)
    totals = [
        fvs_train_step(model, ext, batch, lr=2e-4, step_index=i)[2] for i in range(1, 201)
    ]
    assert totals[199] < totals[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts():
    model = SynthesisModel(widths=TINY, seed=3)
    ext = StyleExtractor(seed=0)
    refs = np.zeros((1, 3, 64, 64)) + 0.5
    targets = np.full((1, 3, 64, 64), 1e38)
    with pytest.raises(ContractError, match="non-finite synthesis loss at step 4"):
        fvs_train_step(model, ext, (refs, targets, np.zeros((1, 2, 64, 64))), lr=2e-4, step_index=4)


def test_loop_logs_and_checkpoints(tmp_path, scene_source):
    model = SynthesisModel(widths=TINY, seed=4)
    ext = StyleExtractor(seed=7)
    result = train_synthesizer(
        model, ext, [scene_source], steps=4, batch_size=2, seed=3,
        out_dir=tmp_path, log_every=1,
    )
    assert result.steps_run == 4
    with open(result.loss_csv, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert [int(r["step"]) for r in rows] == [1, 2, 3, 4]
    assert all(r["source"] == "scenes" for r in rows)
    assert all(float(r["total"]) >= float(r["l1"]) * 0 for r in rows)

    loaded, loaded_ext, step = load_synthesizer(result.checkpoint_path)
    assert step == 4 and loaded_ext.seed == 7
    for name, arr in model.params.state_arrays().items():
        assert np.array_equal(arr, loaded.params.state_arrays()[name]), name


def test_resume_matches_uninterrupted_run(tmp_path, scene_source):
    ext = StyleExtractor(seed=0)
    kw = dict(batch_size=2, lr=2e-4, seed=13, log_every=1)

    straight = SynthesisModel(widths=TINY, seed=5)
    train_synthesizer(straight, ext, [scene_source], steps=6, out_dir=tmp_path / "a", **kw)

    half = SynthesisModel(widths=TINY, seed=5)
    mid = train_synthesizer(half, ext, [scene_source], steps=3, out_dir=tmp_path / "b", **kw)
    resumed = SynthesisModel(widths=TINY, seed=5)
    train_synthesizer(
        resumed, ext, [scene_source], steps=6, out_dir=tmp_path / "c",
        resume_from=mid.checkpoint_path, **kw,
    )

    want = straight.params.state_arrays()
    got = resumed.params.state_arrays()
    assert want.keys() == got.keys()
    for name in want:
        assert want[name].tobytes() == got[name].tobytes(), name


def test_early_stop_and_eval(tmp_path, scene_source):
    model = SynthesisModel(widths=TINY, seed=6)
    ext = StyleExtractor(seed=0)
    holdout = scene_source.pairs[:2]

    def stop(step, current):
        return evaluate_synthesizer(current, holdout, levels=1) > 20.0

    result = train_synthesizer(
        model, ext, [scene_source], steps=40, batch_size=2, seed=1,
        out_dir=tmp_path, eval_every=5, early_stop=stop,
    )
    assert result.stopped_early and result.steps_run <= 40
    assert evaluate_synthesizer(model, holdout, levels=1) > 20.0
