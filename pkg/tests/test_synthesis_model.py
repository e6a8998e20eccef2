"""Recurrent synthesizer forward behavior and exactness hooks."""

import numpy as np
import pytest
from scipy.special import expit

import magniflow.nn as nn
from magniflow.errors import ContractError
from magniflow.flowcore import FlowField, ImageBuffer
from magniflow.synthesis import SynthesisModel, blend_scale, synthesize_frame

TINY = (4, 8, 8)


def random_image(rng, size, channels=1):
    return ImageBuffer(rng.uniform(0.02, 0.98, (size, size, channels)).astype(np.float32))


def test_blend_formula_matches_elementwise():
    rng = np.random.default_rng(0)
    warped = rng.uniform(0, 1, (2, 3, 5, 7)).astype(np.float32)
    residual = rng.uniform(-0.5, 0.5, (2, 3, 5, 7)).astype(np.float32)
    logits = rng.uniform(-4, 4, (2, 1, 5, 7)).astype(np.float32)
    got = blend_scale(nn.Tensor(warped), nn.Tensor(residual), nn.Tensor(logits)).data
    want = warped.astype(np.float64) * expit(logits.astype(np.float64)) + residual
    assert np.abs(got - want).max() <= 1e-6


def test_blend_saturation_endpoints():
    rng = np.random.default_rng(1)
    warped = rng.uniform(0, 1, (1, 3, 4, 4)).astype(np.float32)
    residual = rng.uniform(-0.3, 0.3, (1, 3, 4, 4)).astype(np.float32)
    keep = blend_scale(nn.Tensor(warped), nn.Tensor(np.zeros_like(residual)), nn.Tensor(np.full((1, 1, 4, 4), 30.0)))
    assert np.array_equal(keep.data, warped)
    drop = blend_scale(nn.Tensor(warped), nn.Tensor(residual), nn.Tensor(np.full((1, 1, 4, 4), -30.0)))
    assert np.array_equal(drop.data, residual)
    half = blend_scale(nn.Tensor(warped), nn.Tensor(residual), nn.Tensor(np.zeros((1, 1, 4, 4))))
    assert np.abs(half.data - (0.5 * warped + residual)).max() <= 1e-7


@pytest.mark.parametrize("size,levels", [(64, 1), (128, 2), (256, 3)])
def test_override_identity_exact_for_any_depth(size, levels):
    rng = np.random.default_rng(size)
    model = SynthesisModel(widths=TINY, seed=2)
    img = random_image(rng, size)
    out = synthesize_frame(model, img, FlowField.zeros(size, size), levels=levels, decoder_override=True)
    assert np.array_equal(out.data, img.data)


def test_override_identity_rgb():
    rng = np.random.default_rng(3)
    model = SynthesisModel(widths=TINY, seed=2)
    img = random_image(rng, 96, channels=3)
    out = synthesize_frame(model, img, FlowField.zeros(96, 96), decoder_override=True)
    assert np.array_equal(out.data, img.data)


def test_override_integer_translation():
    rng = np.random.default_rng(4)
    model = SynthesisModel(widths=TINY, seed=5)
    img = random_image(rng, 128)
    shift = 3
    u = np.full((128, 128), float(shift), np.float32)
    out = synthesize_frame(model, img, FlowField(u=u, v=np.zeros_like(u)), decoder_override=True)
    # content moved +shift columns; everything right of the clamped band is exact
    assert np.array_equal(out.data[:, shift:, 0], img.data[:, :-shift, 0])


def test_forward_unclamped_and_decoder_active():
    rng = np.random.default_rng(6)
    model = SynthesisModel(widths=TINY, seed=7)
    images = rng.uniform(0, 1, (2, 3, 64, 64))
    flows = rng.uniform(-0.5, 0.5, (2, 2, 64, 64))
    out = model.forward(images, flows, levels=1)
    assert isinstance(out, nn.Tensor) and out.shape == (2, 3, 64, 64)
    warped = model.forward(images, flows, levels=1, decoder_override=True)
    assert not np.array_equal(out.data, warped.data)


def test_grayscale_round_trip_channels():
    rng = np.random.default_rng(8)
    model = SynthesisModel(widths=TINY, seed=9)
    gray = random_image(rng, 64)
    assert synthesize_frame(model, gray, FlowField.zeros(64, 64)).data.shape == (64, 64, 1)
    rgb = random_image(rng, 64, channels=3)
    assert synthesize_frame(model, rgb, FlowField.zeros(64, 64)).data.shape == (64, 64, 3)


def test_same_seed_same_parameters():
    a = SynthesisModel(widths=TINY, seed=11)
    b = SynthesisModel(widths=TINY, seed=11)
    for name, arr in a.params.state_arrays().items():
        assert np.array_equal(arr, b.params.state_arrays()[name]), name
    c = SynthesisModel(widths=TINY, seed=12)
    assert any(
        not np.array_equal(arr, c.params.state_arrays()[name])
        for name, arr in a.params.state_arrays().items()
    )


def test_contract_violations():
    model = SynthesisModel(widths=TINY, seed=0)
    with pytest.raises(ContractError):
        model.forward(np.zeros((1, 1, 64, 64)), np.zeros((1, 2, 64, 64)), levels=1)
    with pytest.raises(ContractError):
        synthesize_frame(model, np.zeros((64, 64, 1)), np.zeros((2, 32, 32)))
    with pytest.raises(ContractError):
        SynthesisModel(widths=(4, 8))
