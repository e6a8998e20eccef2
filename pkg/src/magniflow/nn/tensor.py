"""Minimal reverse-mode tensor engine on numpy arrays.

A Tensor wraps a row-major float array (32-bit by default, 64-bit inside
the ``precision`` context used by gradient tests) together with an
optional gradient buffer and the closure needed to traverse the graph
backwards. Ops live in :mod:`magniflow.nn.ops`; each records its parents
and a vector-Jacobian product returning one gradient per parent.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import ContractError

_DTYPE = np.dtype(np.float32)
_GRAD_ENABLED = True


def current_dtype() -> np.dtype:
    """Storage dtype newly created tensors use."""
    return _DTYPE


def grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the storage dtype, e.g. ``precision("float64")``."""
    global _DTYPE
    dt = np.dtype(dtype)
    if dt.kind != "f" or dt.itemsize not in (4, 8):
        raise ContractError(f"unsupported precision {dtype!r}")
    prev = _DTYPE
    _DTYPE = dt
    try:
        yield
    finally:
        _DTYPE = prev


@contextlib.contextmanager
def no_grad():
    """Disable graph recording; forward results carry no parents."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """One node of the computation graph.

    ``grad`` stays ``None`` until ``backward`` deposits into it; a missing
    buffer reads as an all-zero gradient. Repeated ``backward`` calls
    accumulate additively until ``grad`` is reset to ``None``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=_DTYPE)
        if not np.all(np.isfinite(arr)):
            raise ContractError("tensor data must be finite")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Copy of the value cut loose from the graph."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # Arithmetic sugar; the real work is in ops.py.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __sub__(self, other):
        from . import ops

        return ops.add(self, ops.mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        from . import ops

        return ops.add(ops.mul(self, -1.0), other)

    def __truediv__(self, other):
        from . import ops

        if isinstance(other, Tensor):
            raise ContractError("tensor division is not a primitive; divide by scalars")
        return ops.mul(self, 1.0 / float(other))


def make_node(data, parents, vjp) -> Tensor:
    """Internal constructor for op results; skips the finite-data scan."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    else:
        out.requires_grad = False
        out._parents = ()
        out._vjp = None
    return out


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value))


def _toposort(root: Tensor) -> list:
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Tensor) -> None:
    """Propagate d(root)/d(node) to every reachable tensor requiring grad.

    The traversal computes a fresh full gradient each call and adds it into
    each node's ``grad`` buffer, so calling twice doubles the gradients.
    """
    if root.data.size != 1:
        raise ContractError(f"backward root must be scalar, got shape {root.data.shape}")
    order = _toposort(root)
    flowing = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        grad = flowing.pop(id(node), None)
        if grad is None:
            continue
        if node.requires_grad:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += grad
        if node._vjp is None:
            continue
        for parent, pgrad in zip(node._parents, node._vjp(grad)):
            if pgrad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in flowing:
                flowing[key] = flowing[key] + pgrad
            else:
                flowing[key] = pgrad
