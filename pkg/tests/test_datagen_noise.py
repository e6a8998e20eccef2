import numpy as np
import pytest

from magniflow.datagen import (
    NoiseModel,
    fit_lognormal_mle,
    photon_noise_field,
    simulate_photon_noise,
)
from magniflow.errors import ContractError, DegenerateFitError
from magniflow.flowcore import ImageBuffer


class TestLognormalMLE:
    def test_degenerate_equal_samples(self):
        mu, sigma = fit_lognormal_mle(np.full(100, np.exp(-4.303)))
        assert mu == pytest.approx(-4.303, abs=1e-9)
        assert sigma == pytest.approx(0.0, abs=1e-12)

    def test_two_point_closed_form(self):
        mu, sigma = fit_lognormal_mle([np.e**0, np.e**2])
        assert mu == pytest.approx(1.0, abs=1e-12)
        assert sigma == pytest.approx(1.0, abs=1e-12)

    def test_million_draw_recovery(self):
        rng = np.random.default_rng(42)
        draws = rng.lognormal(mean=-4.303, sigma=0.527, size=1_000_000)
        mu, sigma = fit_lognormal_mle(draws)
        assert abs(mu - (-4.303)) <= 0.01
        assert abs(sigma - 0.527) <= 0.01

    def test_contracts(self):
        with pytest.raises(DegenerateFitError):
            fit_lognormal_mle([1.0])
        with pytest.raises(ContractError):
            fit_lognormal_mle([1.0, -2.0])
        with pytest.raises(ContractError):
            fit_lognormal_mle([1.0, 0.0])


class TestPhotonNoise:
    def test_zero_image_identity(self):
        img = ImageBuffer(np.zeros((16, 16, 1), dtype=np.float32))
        out = simulate_photon_noise(img, 1.0, seed=0)
        assert np.array_equal(out.data, img.data)

    def test_strength_zero_identity(self):
        rng = np.random.default_rng(1)
        img = ImageBuffer(rng.random((16, 16, 3)).astype(np.float32))
        out = simulate_photon_noise(img, 0.0, seed=0)
        assert np.array_equal(out.data, img.data)

    def test_variance_matches_intensity(self):
        # Oracle on the unclamped noise field (the clamp tail is excluded by
        # construction, as the variance contract is defined pre-clamp).
        img = ImageBuffer(np.full((320, 320, 1), 0.25, dtype=np.float32))
        field = photon_noise_field(img, 1.0, np.random.default_rng(2))
        var = float(field.var())
        assert abs(var - 0.25) <= 0.05 * 0.25
        assert abs(float(field.mean())) <= 0.01

    def test_output_clamped(self):
        img = ImageBuffer(np.full((32, 32, 1), 0.5, dtype=np.float32))
        out = simulate_photon_noise(img, 2.0, seed=3)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_negative_strength(self):
        img = ImageBuffer(np.zeros((4, 4, 1), dtype=np.float32))
        with pytest.raises(ContractError):
            simulate_photon_noise(img, -0.5, seed=0)


def test_noise_model_validation():
    with pytest.raises(ContractError):
        NoiseModel(sigma=0.0)
    with pytest.raises(ContractError):
        NoiseModel(blur_sigma=-1.0)
    model = NoiseModel()
    assert model.mu == -4.303 and model.sigma == 0.527 and model.blur_sigma == 3.0
