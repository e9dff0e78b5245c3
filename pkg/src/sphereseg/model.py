"""The spiral-convolution graph U-Net (GC-nnU-Net family).

The trunk mirrors the icosphere hierarchy: the encoder runs from the input
level down to level 1 with three spiral convolutions per level and hex max
pooling in between; the decoder mirrors it with mean unpooling and skip
concatenation. Two-channel softmax heads sit at the full resolution and at
every deep-supervision level; an optional hemisphere-classification head
hangs off the bottleneck. The four ablation variants differ only in which
auxiliary heads/losses are enabled, never in the trunk.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .layers import LEAKY_SLOPE, ClassificationHead, SpiralConv, VertexLinear, max_pool, mean_unpool
from .mesh import MeshHierarchy
from .tensor import Tensor

CHECKPOINT_MAGIC = b"SSCK"
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    input_level: int = 7
    in_features: int = 33
    base_channels: int = 16
    channel_cap: int = 128
    convs_per_level: int = 3
    use_distance_head: bool = False
    use_classification_head: bool = False
    deep_supervision_levels: tuple = ()   # () -> every level below the input level
    seed: int = 0

    def __post_init__(self):
        if self.input_level < 2:
            raise ValueError("input_level must be >= 2")
        self.deep_supervision_levels = tuple(self.deep_supervision_levels) or tuple(
            range(self.input_level - 1, 0, -1))
        bad = [l for l in self.deep_supervision_levels if not 1 <= l < self.input_level]
        if bad:
            raise ValueError(f"deep supervision levels {bad} outside decoder range")

    @property
    def levels(self) -> int:
        return self.input_level

    def channels_at(self, level: int) -> int:
        return min(self.base_channels * 2 ** (self.input_level - level), self.channel_cap)

    def variant_name(self) -> str:
        suffix = ("d" if self.use_distance_head else "") + (
            "c" if self.use_classification_head else "")
        return "GC-nnU-Net" + (f"+{suffix}" if suffix else "")


@dataclass
class ModelOutput:
    levels: list            # output levels, full resolution first
    segmentation: list      # per level, Tensor (V, 2): [non-lesion, lesion] softmax rows
    classification: Tensor | None = None

    @property
    def full_res(self) -> Tensor:
        return self.segmentation[0]

    def lesion_probability(self, i: int = 0) -> Tensor:
        return T.slice_cols(self.segmentation[i], 1, 2)

    def distance_channel(self, i: int = 0) -> Tensor:
        """The non-lesional channel, which doubles as the distance regressor."""
        return T.slice_cols(self.segmentation[i], 0, 1)


class GraphUNet:
    def __init__(self, cfg: ModelConfig, hierarchy: MeshHierarchy, dtype=np.float32):
        for level in range(1, cfg.input_level + 1):
            if level not in hierarchy.icospheres:
                raise ValueError(f"model needs mesh level {level}, not in hierarchy")
        self.cfg = cfg
        self.hierarchy = hierarchy
        self.dtype = dtype
        rng = np.random.default_rng(cfg.seed)
        top = cfg.input_level

        self.enc = {}
        for level in range(top, 0, -1):
            in_ch = cfg.in_features if level == top else cfg.channels_at(level + 1)
            out_ch = cfg.channels_at(level)
            convs = []
            for j in range(cfg.convs_per_level):
                convs.append(SpiralConv(f"enc{level}.conv{j}",
                                        in_ch if j == 0 else out_ch, out_ch,
                                        hierarchy.spiral(level), rng, dtype))
            self.enc[level] = convs

        self.dec = {}
        for level in range(2, top + 1):
            below = cfg.channels_at(level - 1)
            out_ch = cfg.channels_at(level)
            convs = []
            for j in range(cfg.convs_per_level):
                convs.append(SpiralConv(f"dec{level}.conv{j}",
                                        below + out_ch if j == 0 else out_ch, out_ch,
                                        hierarchy.spiral(level), rng, dtype))
            self.dec[level] = convs

        self.heads = {}
        for level in [top] + list(cfg.deep_supervision_levels):
            self.heads[level] = VertexLinear(f"out{level}", cfg.channels_at(level), 2, rng, dtype)

        self.cls_head = None
        if cfg.use_classification_head:
            self.cls_head = ClassificationHead(
                "cls", hierarchy.ico(1).n_vertices, cfg.channels_at(1), rng, dtype)

    # ------------------------------------------------------------- parameters

    def parameters(self):
        """Ordered (name, Tensor) pairs; order is construction order and
        therefore identical across runs with the same config."""
        out = []
        for level in range(self.cfg.input_level, 0, -1):
            for conv in self.enc[level]:
                out.extend(conv.params())
        for level in range(2, self.cfg.input_level + 1):
            for conv in self.dec[level]:
                out.extend(conv.params())
        for level in sorted(self.heads, reverse=True):
            out.extend(self.heads[level].params())
        if self.cls_head is not None:
            out.extend(self.cls_head.params())
        return out

    def n_parameters(self) -> int:
        return sum(int(np.prod(t.shape)) for _, t in self.parameters())

    def zero_grad(self):
        for _, p in self.parameters():
            p.zero_grad()

    # ---------------------------------------------------------------- forward

    def _block(self, convs, x):
        for conv in convs:
            x = T.leaky_relu(conv(x), LEAKY_SLOPE)
        return x

    def forward(self, features: Tensor) -> ModelOutput:
        cfg = self.cfg
        top = cfg.input_level
        expected = (self.hierarchy.ico(top).n_vertices, cfg.in_features)
        if features.shape != expected:
            raise ValueError(f"expected features {expected}, got {features.shape}")

        skips = {}
        x = features
        for level in range(top, 1, -1):
            x = self._block(self.enc[level], x)
            skips[level] = x
            x = max_pool(x, self.hierarchy.parent_map(level))
        x = self._block(self.enc[1], x)

        classification = self.cls_head(x) if self.cls_head is not None else None

        seg = {}
        if 1 in self.heads:
            seg[1] = T.softmax_rows(self.heads[1](x))
        for level in range(2, top + 1):
            x = mean_unpool(x, self.hierarchy.parent_map(level))
            x = T.concat_cols(x, skips[level])
            x = self._block(self.dec[level], x)
            if level in self.heads:
                seg[level] = T.softmax_rows(self.heads[level](x))

        levels = [top] + [l for l in sorted(cfg.deep_supervision_levels, reverse=True)]
        return ModelOutput(levels=levels,
                           segmentation=[seg[l] for l in levels],
                           classification=classification)

    __call__ = forward


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(model: GraphUNet, path):
    """JSON header (config + parameter manifest) followed by an f32 blob."""
    params = model.parameters()
    manifest = []
    offset = 0
    for name, t in params:
        manifest.append({"name": name, "shape": list(t.shape), "offset": offset})
        offset += int(np.prod(t.shape)) * 4
    header = json.dumps({
        "format": "sphereseg-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.cfg),
        "params": manifest,
    }).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for _, t in params:
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_checkpoint(path, hierarchy: MeshHierarchy) -> GraphUNet:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version")
        blob = fh.read()
    cfg_dict = dict(header["config"])
    cfg_dict["deep_supervision_levels"] = tuple(cfg_dict.get("deep_supervision_levels") or ())
    cfg = ModelConfig(**cfg_dict)
    model = GraphUNet(cfg, hierarchy)
    params = dict(model.parameters())
    for entry in header["params"]:
        t = params[entry["name"]]
        shape = tuple(entry["shape"])
        if t.shape != shape:
            raise ValueError(f"{path}: parameter {entry['name']} shape {shape} != {t.shape}")
        count = int(np.prod(shape))
        start = entry["offset"]
        t.data = np.frombuffer(blob, dtype="<f4", count=count,
                               offset=start).reshape(shape).astype(np.float32)
    return model


def checkpoint_config(path) -> ModelConfig:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
    cfg_dict = dict(header["config"])
    cfg_dict["deep_supervision_levels"] = tuple(cfg_dict.get("deep_supervision_levels") or ())
    return ModelConfig(**cfg_dict)
