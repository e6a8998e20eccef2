"""Harmonic magnification encoding and timestep embedding."""

import numpy as np
import pytest

from magniflow.errors import ContractError
from magniflow.magnifier import harmonic_alpha_features, timestep_embedding


def test_alpha_zero_features():
    feats = harmonic_alpha_features(0.0, 4, 100.0)
    assert np.allclose(feats, [0, 1, 1, 1, 1, 0, 0, 0, 0], atol=1e-12)


def test_alpha_max_features_periodic():
    # n = 1: every frequency is an integer multiple of 2 pi
    feats = harmonic_alpha_features(100.0, 4, 100.0)
    assert np.allclose(feats, [1, 1, 1, 1, 1, 0, 0, 0, 0], atol=1e-12)


def test_alpha_quarter_exact_values():
    # n = 0.25: angles pi, 2pi, 4pi, 8pi
    feats = harmonic_alpha_features(25.0, 4, 100.0)
    assert np.allclose(feats, [0.25, -1, 1, 1, 1, 0, 0, 0, 0], atol=1e-12)


def test_random_alphas_match_high_precision_formula():
    rng = np.random.default_rng(0)
    alphas = rng.uniform(0, 100, 100)
    feats = harmonic_alpha_features(alphas, 4, 100.0)
    for i, a in enumerate(alphas):
        n = a / 100.0
        expected = [n]
        expected += [np.cos(2.0 * np.pi * (2.0**k) * n) for k in range(1, 5)]
        expected += [np.sin(2.0 * np.pi * (2.0**k) * n) for k in range(1, 5)]
        assert np.abs(feats[i] - np.asarray(expected)).max() <= 1e-6


def test_out_of_range_clamps_with_warning():
    with pytest.warns(RuntimeWarning):
        high = harmonic_alpha_features(150.0, 4, 100.0)
    assert np.allclose(high, harmonic_alpha_features(100.0, 4, 100.0))
    with pytest.warns(RuntimeWarning):
        low = harmonic_alpha_features(-3.0, 4, 100.0)
    assert np.allclose(low, harmonic_alpha_features(0.0, 4, 100.0))


def test_feature_count_and_contracts():
    assert harmonic_alpha_features(10.0, 6, 100.0).shape == (13,)
    assert harmonic_alpha_features([10.0, 20.0], 4, 100.0).shape == (2, 9)
    with pytest.raises(ContractError):
        harmonic_alpha_features(1.0, 0, 100.0)
    with pytest.raises(ContractError):
        harmonic_alpha_features(1.0, 4, 0.0)


def test_timestep_embedding_shape_and_range():
    emb = timestep_embedding([1, 57, 200], 32)
    assert emb.shape == (3, 32)
    assert np.abs(emb).max() <= 1.0 + 1e-12
    assert not np.allclose(emb[0], emb[1])
    assert np.array_equal(emb, timestep_embedding([1, 57, 200], 32))
    with pytest.raises(ContractError):
        timestep_embedding([1], 7)
