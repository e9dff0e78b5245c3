"""Mesh-aware layers: spiral convolution, hex pooling, mean unpooling, heads."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .mesh import ParentMap, SpiralTable
from .tensor import Tensor

LEAKY_SLOPE = 0.01


def kaiming_weight(rng, fan_in, fan_out, slope=LEAKY_SLOPE, dtype=np.float32):
    """Fan-in scaled normal init matched to the leaky-ReLU gain."""
    gain = np.sqrt(2.0 / (1.0 + slope * slope))
    std = gain / np.sqrt(fan_in)
    return (rng.standard_normal((fan_in, fan_out)) * std).astype(dtype)


class SpiralConv:
    """Convolution whose support is a fixed-length neighbor spiral per vertex.

    Implemented as gather + one dense matmul: the K gathered feature rows are
    flattened (spiral-major) and hit a (K*Cin, Cout) weight. Memory-heavier
    than per-vertex loops but keeps all arithmetic in one BLAS call.
    """

    def __init__(self, name: str, in_channels: int, out_channels: int,
                 spiral: SpiralTable, rng, dtype=np.float32):
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.spiral = spiral
        k = spiral.indices.shape[1]
        self.weight = Tensor(kaiming_weight(rng, k * in_channels, out_channels, dtype=dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        v, k = self.spiral.indices.shape
        if x.shape != (v, self.in_channels):
            raise ValueError(f"{self.name}: expected input {(v, self.in_channels)}, got {x.shape}")
        gathered = T.gather_rows(x, self.spiral.indices)
        flat = T.reshape(gathered, (v, k * self.in_channels))
        return T.add_bias(T.matmul(flat, self.weight), self.bias)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


class VertexLinear:
    """Per-vertex linear map (a 1x1 convolution)."""

    def __init__(self, name: str, in_channels: int, out_channels: int, rng, dtype=np.float32):
        self.name = name
        self.in_channels = in_channels
        self.weight = Tensor(kaiming_weight(rng, in_channels, out_channels, dtype=dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.add_bias(T.matmul(x, self.weight), self.bias)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


def max_pool(x: Tensor, pm: ParentMap) -> Tensor:
    """Downsample fine -> coarse by group max (center vertex included)."""
    if x.shape[0] != pm.unpool_parents.shape[0]:
        raise ValueError(f"max_pool: {x.shape[0]} rows vs fine vertex count "
                         f"{pm.unpool_parents.shape[0]}")
    return T.reduce_max_groups(x, pm.pool_groups)


def mean_unpool(x: Tensor, pm: ParentMap) -> Tensor:
    """Upsample coarse -> fine: retained vertices copy their value, midpoint
    vertices take the mean of their edge's endpoints."""
    if x.shape[0] != pm.pool_groups.shape[0]:
        raise ValueError(f"mean_unpool: {x.shape[0]} rows vs coarse vertex count "
                         f"{pm.pool_groups.shape[0]}")
    return T.reduce_mean_groups(x, pm.unpool_parents)


class ClassificationHead:
    """Hemisphere-level probability from the deepest feature map: a linear
    map over channels, then a linear map over vertices, then a sigmoid."""

    def __init__(self, name: str, n_vertices: int, in_channels: int, rng, dtype=np.float32):
        self.name = name
        self.n_vertices = n_vertices
        self.channel_fc = VertexLinear(f"{name}.channel_fc", in_channels, 1, rng, dtype)
        self.vertex_weight = Tensor(kaiming_weight(rng, n_vertices, 1, dtype=dtype),
                                    requires_grad=True)
        self.vertex_bias = Tensor(np.zeros(1, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[0] != self.n_vertices:
            raise ValueError(f"{self.name}: expected {self.n_vertices} vertices, got {x.shape[0]}")
        h = self.channel_fc(x)                       # (V, 1)
        h = T.reshape(h, (1, self.n_vertices))
        logit = T.add_bias(T.matmul(h, self.vertex_weight), self.vertex_bias)
        return T.sigmoid(T.reshape(logit, ()))

    def params(self):
        return self.channel_fc.params() + [
            (f"{self.name}.vertex_weight", self.vertex_weight),
            (f"{self.name}.vertex_bias", self.vertex_bias),
        ]
