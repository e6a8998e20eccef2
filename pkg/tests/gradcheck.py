"""Central-difference gradient checking shared by the engine tests."""

import numpy as np

from magniflow import nn


def numeric_gradient(fn, tensor, h=1e-5, coords=None):
    """Finite-difference d(fn)/d(tensor) by perturbing elements in place.

    ``coords`` limits the checked flat indices (large parameter tensors);
    unchecked entries are returned as NaN so callers can mask them.
    """
    flat = tensor.data.ravel()
    grad = np.full(flat.shape, np.nan)
    indices = range(flat.size) if coords is None else coords
    for i in indices:
        original = flat[i]
        flat[i] = original + h
        hi = fn().item()
        flat[i] = original - h
        lo = fn().item()
        flat[i] = original
        grad[i] = (hi - lo) / (2.0 * h)
    return grad.reshape(tensor.data.shape)


def check_gradients(fn, tensors, h=1e-5, tol=1e-4, max_coords=None, rng=None):
    """Assert analytic gradients of scalar ``fn()`` match central differences.

    ``fn`` must rebuild its graph from ``tensors`` on every call. Error is
    measured as max absolute difference over the joint gradient scale.
    """
    for t in tensors:
        t.grad = None
    loss = fn()
    nn.backward(loss)
    worst = 0.0
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        coords = None
        if max_coords is not None and t.data.size > max_coords:
            picker = rng if rng is not None else np.random.default_rng(0)
            coords = picker.choice(t.data.size, size=max_coords, replace=False)
        numeric = numeric_gradient(fn, t, h=h, coords=coords)
        mask = np.isfinite(numeric)
        scale = max(np.abs(numeric[mask]).max(initial=0.0), np.abs(analytic[mask]).max(initial=0.0), 1e-8)
        err = float(np.abs(analytic[mask] - numeric[mask]).max(initial=0.0) / scale)
        worst = max(worst, err)
        assert err <= tol, f"gradient mismatch {err:.3e} > {tol:.1e} for shape {t.data.shape}"
    return worst
