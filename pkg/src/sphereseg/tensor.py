"""Dense-tensor reverse-mode autodiff over numpy arrays.

A deliberately small, fixed operator set: no general broadcasting, 2-D
matmul only, and group reductions driven by explicit index matrices. Data is
float32 by default; building graphs in float64 is supported for gradient
checking. Reduction order is fixed, so forward and backward passes are
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            raise TypeError("wrap ndarrays or scalars, not Tensors")
        self.data = np.asarray(data, dtype=dtype if dtype is not None else None)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float32)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse-mode sweep from a scalar; accumulates into .grad fields."""
        if self.data.shape != ():
            raise ValueError(f"backward requires a scalar, got shape {self.data.shape}")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={'set' if self.grad is not None else 'none'})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(data, inputs, backward):
    out = Tensor(data)
    out.requires_grad = any(t.requires_grad for t in inputs)
    if out.requires_grad:
        out._prev = tuple(inputs)
        out._backward = backward
    return out


def _check_same_shape(a, b, op):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


# ------------------------------------------------------------- elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def backward(g):
        a.accumulate_grad(g)
        b.accumulate_grad(g)

    return _result(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def backward(g):
        a.accumulate_grad(g)
        b.accumulate_grad(-g)

    return _result(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def backward(g):
        a.accumulate_grad(g * b.data)
        b.accumulate_grad(g * a.data)

    return _result(a.data * b.data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "div")

    def backward(g):
        a.accumulate_grad(g / b.data)
        b.accumulate_grad(-g * a.data / (b.data * b.data))

    return _result(a.data / b.data, (a, b), backward)


def neg(x: Tensor) -> Tensor:
    def backward(g):
        x.accumulate_grad(-g)

    return _result(-x.data, (x,), backward)


def mul_scalar(x: Tensor, s: float) -> Tensor:
    s = x.data.dtype.type(s)

    def backward(g):
        x.accumulate_grad(g * s)

    return _result(x.data * s, (x,), backward)


def add_scalar(x: Tensor, s: float) -> Tensor:
    s = x.data.dtype.type(s)

    def backward(g):
        x.accumulate_grad(g)

    return _result(x.data + s, (x,), backward)


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    factor = np.where(x.data > 0, x.data.dtype.type(1.0), x.data.dtype.type(slope))

    def backward(g):
        x.accumulate_grad(g * factor)

    return _result(x.data * factor, (x,), backward)


def log(x: Tensor) -> Tensor:
    def backward(g):
        x.accumulate_grad(g / x.data)

    return _result(np.log(x.data), (x,), backward)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only through the interior."""
    inside = (x.data > lo) & (x.data < hi)

    def backward(g):
        x.accumulate_grad(g * inside)

    return _result(np.clip(x.data, lo, hi), (x,), backward)


def abs_(x: Tensor) -> Tensor:
    sign = np.sign(x.data)

    def backward(g):
        x.accumulate_grad(g * sign)

    return _result(np.abs(x.data), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        x.accumulate_grad(g * s * (1.0 - s))

    return _result(s, (x,), backward)


# ------------------------------------------------------------ linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.data.shape} x {b.data.shape}")

    def backward(g):
        a.accumulate_grad(g @ b.data.T)
        b.accumulate_grad(a.data.T @ g)

    return _result(a.data @ b.data, (a, b), backward)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """x (N, C) plus a (C,) bias row vector."""
    if x.data.ndim != 2 or bias.data.shape != (x.data.shape[1],):
        raise ValueError(f"add_bias: shapes {x.data.shape} and {bias.data.shape}")

    def backward(g):
        x.accumulate_grad(g)
        bias.accumulate_grad(g.sum(axis=0))

    return _result(x.data + bias.data, (x, bias), backward)


def reshape(x: Tensor, shape) -> Tensor:
    original = x.data.shape

    def backward(g):
        x.accumulate_grad(g.reshape(original))

    return _result(x.data.reshape(shape), (x,), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise ValueError(f"concat_cols: shapes {a.data.shape} and {b.data.shape}")
    split = a.data.shape[1]

    def backward(g):
        a.accumulate_grad(g[:, :split])
        b.accumulate_grad(g[:, split:])

    return _result(np.concatenate([a.data, b.data], axis=1), (a, b), backward)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.data.ndim != 2:
        raise ValueError("slice_cols expects a 2-D tensor")
    n_cols = x.data.shape[1]

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        x.accumulate_grad(full)

    return _result(x.data[:, start:stop].copy(), (x,), backward)


def softmax_rows(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ValueError("softmax_rows expects a 2-D tensor")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        dot = (g * s).sum(axis=1, keepdims=True)
        x.accumulate_grad((g - dot) * s)

    return _result(s, (x,), backward)


# ----------------------------------------------------------- gather / groups

def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """out[v, k, :] = x[idx[v, k], :]; backward scatter-adds to source rows."""
    if x.data.ndim != 2:
        raise ValueError("gather_rows expects a 2-D tensor")
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise ValueError("gather index out of range")
    n_rows = x.data.shape[0]

    def backward(g):
        x.accumulate_grad(kernels.scatter_add_rows(np.ascontiguousarray(g), idx, n_rows))

    return _result(kernels.gather_rows(x.data, idx), (x,), backward)


def reduce_max_groups(x: Tensor, groups: np.ndarray) -> Tensor:
    """Column-wise max over row groups; gradient flows to the winning row
    only (first occurrence, i.e. smallest vertex index on ties)."""
    if x.data.ndim != 2:
        raise ValueError("reduce_max_groups expects a 2-D tensor")
    groups = np.asarray(groups)
    out, argpos = kernels.group_max(x.data, groups)
    n_rows = x.data.shape[0]

    def backward(g):
        x.accumulate_grad(kernels.group_max_backward(np.ascontiguousarray(g),
                                                     groups, argpos, n_rows))

    return _result(out, (x,), backward)


def reduce_mean_groups(x: Tensor, groups: np.ndarray) -> Tensor:
    """Column-wise mean over row groups (fixed group width)."""
    if x.data.ndim != 2:
        raise ValueError("reduce_mean_groups expects a 2-D tensor")
    groups = np.asarray(groups)
    n_rows = x.data.shape[0]

    def backward(g):
        x.accumulate_grad(kernels.group_mean_backward(np.ascontiguousarray(g),
                                                      groups, n_rows))

    return _result(kernels.group_mean(x.data, groups), (x,), backward)


# ---------------------------------------------------------------- reductions

def reduce_sum(x: Tensor) -> Tensor:
    def backward(g):
        x.accumulate_grad(np.broadcast_to(g, x.data.shape).copy())

    return _result(x.data.sum(), (x,), backward)


def reduce_mean(x: Tensor) -> Tensor:
    inv = 1.0 / x.data.size

    def backward(g):
        x.accumulate_grad(np.full_like(x.data, g * inv))

    return _result(x.data.mean(), (x,), backward)
