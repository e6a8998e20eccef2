import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magniflow.errors import ContractError
from magniflow.flowcore import (
    FlowField,
    ImageBuffer,
    flow_metrics,
    image_metrics,
    phase_correlation,
    psnr,
    ssim,
)


def flow_of(u, v, h=4, w=4):
    return FlowField(u=np.full((h, w), u, np.float32), v=np.full((h, w), v, np.float32))


class TestFlowMetrics:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(1)
        f = FlowField.from_array(rng.normal(size=(5, 5, 2)).astype(np.float32))
        assert flow_metrics(f, f) == 0.0

    def test_three_four_five(self):
        assert flow_metrics(flow_of(3.0, 4.0), flow_of(0.0, 0.0)) == pytest.approx(5.0)

    def test_matches_per_pixel_brute_force(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(8, 8, 2)).astype(np.float32)
        b = rng.normal(size=(8, 8, 2)).astype(np.float32)
        got = flow_metrics(FlowField.from_array(a), FlowField.from_array(b))
        acc = 0.0
        for r in range(8):
            for c in range(8):
                du = float(a[r, c, 0]) - float(b[r, c, 0])
                dv = float(a[r, c, 1]) - float(b[r, c, 1])
                acc += (du * du + dv * dv) ** 0.5
        assert got == pytest.approx(acc / 64.0, abs=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(ContractError):
            flow_metrics(FlowField.zeros(4, 4), FlowField.zeros(4, 5))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_symmetry_and_triangle(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (FlowField.from_array(rng.normal(size=(4, 4, 2)).astype(np.float32)) for _ in range(3))
        assert flow_metrics(a, b) == pytest.approx(flow_metrics(b, a), abs=1e-9)
        assert flow_metrics(a, c) <= flow_metrics(a, b) + flow_metrics(b, c) + 1e-9


class TestImageMetrics:
    def test_identical_caps(self):
        rng = np.random.default_rng(3)
        img = ImageBuffer(rng.random((16, 16, 3)).astype(np.float32))
        p, s = image_metrics(img, img)
        assert p == 99.0
        assert s == pytest.approx(1.0, abs=1e-9)

    def test_uniform_half_gap_closed_form(self):
        a = ImageBuffer(np.zeros((8, 8, 1), dtype=np.float32))
        b = ImageBuffer(np.full((8, 8, 1), 0.5, dtype=np.float32))
        assert psnr(a, b) == pytest.approx(6.0206, abs=1e-3)

    def test_ssim_matches_windowed_oracle(self):
        rng = np.random.default_rng(4)
        a = ImageBuffer(rng.random((20, 20, 1)).astype(np.float32))
        noise = rng.normal(scale=0.05, size=(20, 20, 1))
        b = ImageBuffer(np.clip(a.data + noise, 0, 1).astype(np.float32))
        got = ssim(a, b)
        want = ssim_oracle(a.data[:, :, 0].astype(np.float64), b.data[:, :, 0].astype(np.float64))
        assert got == pytest.approx(want, abs=1e-5)

    def test_dim_mismatch(self):
        with pytest.raises(ContractError):
            psnr(
                ImageBuffer(np.zeros((4, 4, 1), np.float32)),
                ImageBuffer(np.zeros((4, 5, 1), np.float32)),
            )


def ssim_oracle(x, y):
    """Direct per-window statistics, no convolution shortcuts."""
    taps = np.arange(11, dtype=np.float64) - 5.0
    g = np.exp(-0.5 * (taps / 1.5) ** 2)
    g /= g.sum()
    win = np.outer(g, g)
    h, w = x.shape
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for r in range(5, h - 5):
        for c in range(5, w - 5):
            px = x[r - 5 : r + 6, c - 5 : c + 6]
            py = y[r - 5 : r + 6, c - 5 : c + 6]
            mx = (win * px).sum()
            my = (win * py).sum()
            vx = (win * px * px).sum() - mx * mx
            vy = (win * py * py).sum() - my * my
            cov = (win * px * py).sum() - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


class TestPhaseCorrelation:
    def test_integer_shift(self):
        rng = np.random.default_rng(5)
        a = rng.random((64, 64))
        b = np.roll(a, (0, 3), axis=(0, 1))  # content moves +3 in x
        dx, dy = phase_correlation(a, b)
        assert dx == pytest.approx(3.0, abs=0.05)
        assert dy == pytest.approx(0.0, abs=0.05)

    def test_subpixel_shift(self):
        from magniflow.flowcore import gaussian_blur, warp_array

        rng = np.random.default_rng(6)
        a = gaussian_blur(rng.random((64, 64)), 1.0)
        shift = 0.4
        b = warp_array(a, np.full_like(a, -shift), np.zeros_like(a))
        dx, dy = phase_correlation(a, b)
        assert dx == pytest.approx(shift, abs=0.1)
        assert dy == pytest.approx(0.0, abs=0.1)
