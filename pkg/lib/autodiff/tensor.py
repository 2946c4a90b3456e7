"""
Reverse-mode automatic differentiation over dense float64 tensors.

A Tensor produced by an op remembers its parents and a local backward rule
while gradient tracking is enabled. `Tensor.backward()` builds a
ComputationRecord (the topologically ordered nodes reachable from the loss)
and walks it in reverse, so each node's rule runs exactly once.

Gradient mode and FLOP counters are thread-local: independent runs may train in
parallel threads, each with its own computation records.
"""

import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from lib.errors import NonFiniteValue, NotScalar

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], None]


class _ThreadState(threading.local):
    def __init__(self) -> None:
        self.grad_enabled = True
        self.flop_counters: List["FlopCounter"] = []


_state = _ThreadState()


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable gradient tracking in the current thread."""
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def is_grad_enabled() -> bool:
    return _state.grad_enabled


class FlopCounter:
    """
    Counts floating-point operations of instrumented ops inside a `with` block.

    matmul contributes 2*m*k*n per product; nested counters all receive counts.
    """

    def __init__(self) -> None:
        self.flops = 0

    def __enter__(self) -> "FlopCounter":
        _state.flop_counters.append(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        _state.flop_counters.remove(self)


def count_flops(n: int) -> None:
    for counter in _state.flop_counters:
        counter.flops += int(n)


class Tensor:
    """
    n-dimensional float64 value with an optional gradient buffer.

    Leaf tensors are created directly; op results are created through
    `Tensor.from_op`, which enforces finiteness of every forward value.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str
    ) -> "Tensor":
        data = np.asarray(data, dtype=np.float64)
        if not np.isfinite(data).all():
            raise NonFiniteValue(f"{op} produced non-finite values")
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        tracked = _state.grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._backward = backward if tracked else None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise NotScalar(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def copy(self) -> "Tensor":
        """Independent leaf with the same value and tracking flag."""
        return Tensor(self.data, requires_grad=self.requires_grad, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ValueError(f"Gradient shape {grad.shape} does not match value shape {self.shape}")
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad += grad

    def backward(self) -> None:
        """
        Populate `grad` of every tracked tensor reachable from this scalar.

        Leaf gradients accumulate across calls; intermediate gradients are
        recomputed on each call.
        """
        if self.data.size != 1:
            raise NotScalar(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward() called on a tensor that does not require grad")

        record = ComputationRecord.from_output(self)
        for node in record.nodes:
            if not node.is_leaf:
                node.grad = None
        self.accumulate(np.ones_like(self.data))

        for node in reversed(record.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operator sugar delegates to lib.autodiff.functional.

    def __add__(self, other: Any) -> "Tensor":
        from lib.autodiff import functional as F

        return F.add(self, as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Tensor":
        from lib.autodiff import functional as F

        return F.sub(self, as_tensor(other))

    def __mul__(self, other: Any) -> "Tensor":
        from lib.autodiff import functional as F

        return F.mul(self, as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from lib.autodiff import functional as F

        return F.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from lib.autodiff import functional as F

        return F.matmul(self, other)

    def __getitem__(self, key: Any) -> "Tensor":
        from lib.autodiff import functional as F

        return F.getitem(self, key)


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


@dataclass
class ComputationRecord:
    """Tensors reachable from an output, inputs before the ops that consume them."""

    nodes: List[Tensor]

    @classmethod
    def from_output(cls, output: Tensor) -> "ComputationRecord":
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(nodes=order)

    def __len__(self) -> int:
        return len(self.nodes)
