"""Segmentation and auxiliary losses, plus the deep-supervision composite.

Per-vertex targets are plain numpy arrays; predictions are autodiff tensors.
Probabilities are clamped to [1e-7, 1 - 1e-7] before any log, never inside
the log op itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mesh
from . import tensor as T
from .tensor import Tensor

PROB_EPS = 1e-7

# Deep-supervision weights, positionally aligned with decoder levels ordered
# from one-below-input down to level 1. Shallower models use a prefix.
DEFAULT_DS_WEIGHTS = (0.5, 0.25, 0.125, 0.0625, 0.03125, 0.0150765)


@dataclass
class LossWeights:
    w_ds: tuple = DEFAULT_DS_WEIGHTS
    dice_epsilon: float = 1e-5
    enable_dist: bool = False
    enable_class: bool = False
    ce_normalize: bool = True
    dist_in_deep_supervision: bool = True

    def __post_init__(self):
        self.w_ds = tuple(float(w) for w in self.w_ds)
        if any(w <= 0 for w in self.w_ds):
            raise ValueError("deep-supervision weights must be positive")

    def for_levels(self, ds_levels) -> dict:
        """Map each deep-supervision level (descending) to its weight."""
        ds_levels = sorted(ds_levels, reverse=True)
        if len(ds_levels) > len(self.w_ds):
            raise ValueError(f"{len(ds_levels)} deep-supervision levels but only "
                             f"{len(self.w_ds)} weights")
        return {level: self.w_ds[i] for i, level in enumerate(ds_levels)}


def _flatten_pair(target, pred: Tensor, op: str):
    t = np.asarray(target, dtype=pred.dtype).ravel()
    n = int(np.prod(pred.shape)) if pred.shape else 1
    if t.shape[0] != n:
        raise ValueError(f"{op}: target length {t.shape[0]} != prediction size {n}")
    return t, T.reshape(pred, (n,))


def cross_entropy(y, y_hat: Tensor, normalize: bool = True) -> Tensor:
    """- sum_i [ y log(p) + (1-y) log(1-p) ], optionally divided by n.

    The raw sum is the textbook form; normalizing by the vertex count keeps
    the value on one scale across mesh resolutions and is the training
    default.
    """
    t, p = _flatten_pair(y, y_hat, "cross_entropy")
    n = t.shape[0]
    pc = T.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    pos = T.mul(Tensor(t), T.log(pc))
    neg_p = T.add_scalar(T.neg(pc), 1.0)
    neg_term = T.mul(Tensor(1.0 - t), T.log(neg_p))
    total = T.neg(T.reduce_sum(T.add(pos, neg_term)))
    return T.mul_scalar(total, 1.0 / n) if normalize else total


def dice_loss(y, y_hat: Tensor, epsilon: float = 1e-5) -> Tensor:
    """1 - 2*sum(y*p) / (sum(y^2) + sum(p^2) + eps).

    With y and p both all-zero the epsilon forces the value to exactly 1.
    """
    t, p = _flatten_pair(y, y_hat, "dice_loss")
    inter = T.reduce_sum(T.mul(Tensor(t), p))
    denom = T.add_scalar(T.add(Tensor(np.sum(t * t, dtype=t.dtype)),
                               T.reduce_sum(T.mul(p, p))), epsilon)
    return T.add_scalar(T.neg(T.div(T.mul_scalar(inter, 2.0), denom)), 1.0)


def distance_loss(d_norm, y_hat0: Tensor) -> Tensor:
    """(1/n) sum_i |d_i - p0_i| / (d_i + 1).

    The 1/(d+1) weight keeps errors near the target region expensive while
    forgiving equal-sized errors far from it.
    """
    d, p0 = _flatten_pair(d_norm, y_hat0, "distance_loss")
    weight = (1.0 / (d + 1.0)).astype(d.dtype)
    return T.reduce_mean(T.mul(T.abs_(T.sub(Tensor(d), p0)), Tensor(weight)))


def classification_loss(c, c_hat) -> Tensor:
    """Cross-entropy of per-sample labels against predicted probabilities,
    summed over the batch."""
    labels = np.atleast_1d(np.asarray(c, dtype=np.float64))
    preds = list(c_hat) if isinstance(c_hat, (list, tuple)) else [c_hat]
    if labels.shape[0] != len(preds):
        raise ValueError(f"classification_loss: {labels.shape[0]} labels "
                         f"vs {len(preds)} predictions")
    total = None
    for label, pred in zip(labels, preds):
        pc = T.clamp(T.reshape(pred, ()), PROB_EPS, 1.0 - PROB_EPS)
        if label >= 0.5:
            term = T.neg(T.log(pc))
        else:
            term = T.neg(T.log(T.add_scalar(T.neg(pc), 1.0)))
        total = term if total is None else T.add(total, term)
    return total


# ------------------------------------------------------------ level targets

@dataclass
class LevelTargets:
    """Per-output-level masks and distance targets plus the sample label."""

    levels: list
    masks: dict        # level -> (V_level,) float32 binary
    d_norms: dict      # level -> (V_level,) float32 in [0, 1]
    label: float       # 1.0 if any full-resolution vertex is lesional


def build_level_targets(hierarchy: mesh.MeshHierarchy, levels, mask,
                        cap_mm: float = mesh.DISTANCE_CAP_MM) -> LevelTargets:
    """Pool the lesion mask down the hierarchy (group max, so any lesional
    child marks the parent) and recompute the distance target per level."""
    levels = list(levels)
    top = levels[0]
    m = np.asarray(mask).astype(np.float32).ravel()
    if m.shape[0] != hierarchy.ico(top).n_vertices:
        raise ValueError(f"mask length {m.shape[0]} != level-{top} vertex count")
    masks = {top: m}
    current = m
    for level in range(top - 1, 0, -1):
        pm = hierarchy.parent_map(level + 1)
        current = current[pm.pool_groups].max(axis=1)
        masks[level] = current
    d_norms = {}
    for level in levels:
        ico = hierarchy.ico(level)
        d_norms[level] = mesh.normalized_boundary_distance(
            ico, masks[level], cap_mm=cap_mm).astype(np.float32)
    return LevelTargets(levels=levels, masks={l: masks[l] for l in levels},
                        d_norms=d_norms, label=float(m.max() > 0))


# ---------------------------------------------------------------- composite

def total_loss(output, targets: LevelTargets, lw: LossWeights):
    """Weighted sum of all enabled losses across output levels.

    Returns (scalar tensor, breakdown dict). Breakdown entries are the
    weighted contributions actually added, so they sum to the total;
    disabled terms appear as exact zeros.
    """
    for level in output.levels:
        if level not in targets.masks or level not in targets.d_norms:
            raise ValueError(f"missing target for output level {level}")
    w_map = lw.for_levels(output.levels[1:])

    breakdown = {}
    top_seg = output.segmentation[0]
    y = targets.masks[output.levels[0]]
    l_ce = cross_entropy(y, T.slice_cols(top_seg, 1, 2), normalize=lw.ce_normalize)
    l_dice = dice_loss(y, T.slice_cols(top_seg, 1, 2), epsilon=lw.dice_epsilon)
    total = T.add(l_ce, l_dice)
    breakdown["ce"] = l_ce.item()
    breakdown["dice"] = l_dice.item()

    if lw.enable_dist:
        l_dist = distance_loss(targets.d_norms[output.levels[0]],
                               T.slice_cols(top_seg, 0, 1))
        total = T.add(total, l_dist)
        breakdown["dist"] = l_dist.item()
    else:
        breakdown["dist"] = 0.0

    if lw.enable_class:
        if output.classification is None:
            raise ValueError("classification loss enabled but model has no head")
        l_cls = classification_loss([targets.label], [output.classification])
        total = T.add(total, l_cls)
        breakdown["class"] = l_cls.item()
    else:
        breakdown["class"] = 0.0

    for i, level in enumerate(output.levels[1:], start=1):
        w = w_map[level]
        seg = output.segmentation[i]
        y_l = targets.masks[level]
        ce_l = cross_entropy(y_l, T.slice_cols(seg, 1, 2), normalize=lw.ce_normalize)
        dice_l = dice_loss(y_l, T.slice_cols(seg, 1, 2), epsilon=lw.dice_epsilon)
        bracket = T.add(ce_l, dice_l)
        breakdown[f"ds{level}_ce"] = w * ce_l.item()
        breakdown[f"ds{level}_dice"] = w * dice_l.item()
        if lw.enable_dist and lw.dist_in_deep_supervision:
            dist_l = distance_loss(targets.d_norms[level], T.slice_cols(seg, 0, 1))
            bracket = T.add(bracket, dist_l)
            breakdown[f"ds{level}_dist"] = w * dist_l.item()
        else:
            breakdown[f"ds{level}_dist"] = 0.0
        total = T.add(total, T.mul_scalar(bracket, w))

    breakdown["total"] = total.item()
    return total, breakdown
