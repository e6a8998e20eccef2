import numpy as np
import pytest

from magniflow.errors import ContractError
from magniflow.flowcore import FlowField, ImageBuffer, estimate_flow, gaussian_blur, warp_array


def textured(h=64, w=64, seed=0, smooth=1.0):
    rng = np.random.default_rng(seed)
    base = gaussian_blur(rng.random((h, w)), smooth)
    base = (base - base.min()) / (base.max() - base.min())
    return base


def as_image(arr):
    return ImageBuffer(np.clip(arr, 0, 1).astype(np.float32)[:, :, None])


def shifted(arr, dx, dy):
    """Content moves by (+dx, +dy): out(p) = arr(p - d)."""
    return warp_array(arr, np.full_like(arr, -dx), np.full_like(arr, -dy))


def test_identical_frames_zero_flow():
    a = as_image(textured(seed=1))
    flow = estimate_flow(a, a)
    assert np.all(flow.u == 0.0)
    assert np.all(flow.v == 0.0)


def test_integer_shift_recovered():
    base = textured(seed=2, smooth=1.2)
    a = as_image(base)
    b = as_image(shifted(base, 2.0, 0.0))
    flow = estimate_flow(a, b)
    interior_u = flow.u[12:-12, 12:-12]
    interior_v = flow.v[12:-12, 12:-12]
    epe = np.hypot(interior_u - 2.0, interior_v).mean()
    assert epe < 0.2


def test_subpixel_shift_recovered():
    base = textured(seed=3, smooth=1.5)
    a = as_image(base)
    b = as_image(shifted(base, 0.3, 0.0))
    flow = estimate_flow(a, b)
    mean_u = float(flow.u[12:-12, 12:-12].mean())
    assert abs(mean_u - 0.3) <= 0.1
    assert abs(float(flow.v[12:-12, 12:-12].mean())) <= 0.1


def test_textureless_regions_stay_zero():
    arr = np.full((48, 48), 0.5)
    a = as_image(arr)
    b = as_image(arr + 0.0)
    flow = estimate_flow(a, b)
    assert np.all(np.isfinite(flow.u)) and np.all(np.isfinite(flow.v))
    assert np.all(flow.u == 0.0) and np.all(flow.v == 0.0)


def test_flow_direction_convention():
    # Warping the query backward by the estimated flow reproduces the reference.
    base = textured(seed=4, smooth=1.5)
    a = as_image(base)
    b = as_image(shifted(base, 1.0, 0.5))
    flow = estimate_flow(a, b)
    back = warp_array(b.data[:, :, 0].astype(np.float64), flow.u, flow.v)
    err = np.abs(back - a.data[:, :, 0])[10:-10, 10:-10].mean()
    raw = np.abs(b.data[:, :, 0] - a.data[:, :, 0])[10:-10, 10:-10].mean()
    assert err < 0.3 * raw


def test_contract_errors():
    a = as_image(textured(seed=5))
    with pytest.raises(ContractError):
        estimate_flow(a, as_image(np.zeros((10, 10))))
    with pytest.raises(ContractError):
        estimate_flow(a, a, window=4)
    with pytest.raises(ContractError):
        estimate_flow(a, a, levels=0)
