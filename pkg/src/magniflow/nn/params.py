"""Named parameter collections, seeded initialization, and AdamW."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .tensor import Tensor, current_dtype


class ParameterSet:
    """Ordered name -> Tensor mapping with per-parameter AdamW moments.

    Insertion order is the optimizer's update order, which keeps steps
    bit-reproducible. Moment buffers stay shape-locked to their parameter.
    """

    def __init__(self):
        self._params: dict = {}
        self._m: dict = {}
        self._v: dict = {}
        self.step_count = 0

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        tensor = Tensor(data, requires_grad=True)
        self._params[name] = tensor
        self._m[name] = np.zeros_like(tensor.data)
        self._v[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def moments(self, name: str):
        return self._m[name], self._v[name]

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.grad = None

    def state_arrays(self) -> dict:
        """Flat name -> array view of everything a checkpoint must carry."""
        out = {}
        for name, tensor in self._params.items():
            out[f"param/{name}"] = tensor.data
        for name in self._params:
            out[f"adam_m/{name}"] = self._m[name]
            out[f"adam_v/{name}"] = self._v[name]
        return out

    def load_state_arrays(self, arrays: dict, step_count: int) -> None:
        """Restore values and moments; shapes and names must match exactly."""
        from ..errors import CheckpointError

        expected = set(self.state_arrays())
        provided = set(arrays)
        if expected != provided:
            missing = sorted(expected - provided)
            extra = sorted(provided - expected)
            raise CheckpointError(f"tensor name mismatch: missing {missing}, unexpected {extra}")
        dtype = current_dtype()
        for name, tensor in self._params.items():
            for key, target in (
                (f"param/{name}", None),
                (f"adam_m/{name}", self._m),
                (f"adam_v/{name}", self._v),
            ):
                value = np.asarray(arrays[key])
                if value.shape != tensor.data.shape:
                    raise CheckpointError(
                        f"{key}: stored shape {value.shape} != model shape {tensor.data.shape}"
                    )
                if target is None:
                    tensor.data = value.astype(dtype)
                else:
                    target[name] = value.astype(dtype)
        self.step_count = int(step_count)


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """He-uniform draw with bound sqrt(6 / fan_in)."""
    if fan_in < 1:
        raise ContractError(f"fan_in must be positive, got {fan_in}")
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(current_dtype())


_SEED_MASK = (1 << 63) - 1


def step_seed(master: int, step: int) -> np.random.Generator:
    """Counter-derived generator so any step is reproducible in isolation."""
    return np.random.default_rng(np.random.SeedSequence([master & _SEED_MASK, step]))


def adamw_step(
    params: ParameterSet,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> None:
    """One optimizer step: decoupled decay, then bias-corrected moments."""
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"parameter {name!r} has no gradient")
    params.step_count += 1
    t = params.step_count
    correct1 = 1.0 - beta1**t
    correct2 = 1.0 - beta2**t
    for name, p in params.items():
        g = p.grad
        p.data = p.data * (1.0 - lr * weight_decay)
        m = params._m[name]
        v = params._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data = p.data - lr * (m / correct1) / (np.sqrt(v / correct2) + eps)
