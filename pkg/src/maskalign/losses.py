"""Alignment objectives between masked frame pools and caption embeddings.

All similarities are cosine with an epsilon floor on the norms. The
margin-ranking term for a batch of B videos, video b holding K_b events,
is

    sim = (1/B) sum_b (1/K_b) sum_i max(0, margin - s_plus_i + s_minus_i)

where s_plus_i is the similarity of event i's pooled embedding to its
own caption and s_minus_i the maximum similarity to any other caption of
the same video (the hard negative; ties resolve to the lowest index,
and K_b = 1 uses s_minus = 0).

The inverse variant pools through complement masks and swaps the roles:
the positive target is the mean of the other captions, the hard negative
is the event's own caption. Videos with a single event contribute zero.

The augmentation term compares transition-mask pools against synthetic
transition captions:

    aug = (1/B) sum_b (1/(K_b - 1)) sum_i (1 - cos(inter_i, syn_i))

skipping videos with fewer than two events. The diversity term is the
mean pairwise cosine between a video's mask weight vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import EmptyBatch, InvalidParameter, NumericalError, ShapeError
from .masks import Mask, MaskKind


class PoolingMode(str, Enum):
    PLAIN_MEAN = "plain_mean"
    MASK_WEIGHTED = "mask_weighted"


@dataclass(frozen=True)
class PooledEmbedding:
    """A mask-pooled frame embedding, tagged with the producing kernel."""

    vector: np.ndarray
    source_mask_kind: MaskKind


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.1
    alpha_aug: float = 0.25
    lambda_div: float = 0.0
    pooling: PoolingMode = PoolingMode.PLAIN_MEAN
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not (math.isfinite(self.margin) and self.margin >= 0.0):
            raise InvalidParameter(f"margin must be >= 0, got {self.margin}")
        if not (math.isfinite(self.alpha_aug) and self.alpha_aug >= 0.0):
            raise InvalidParameter(f"alpha_aug must be >= 0, got {self.alpha_aug}")
        if not (math.isfinite(self.lambda_div) and self.lambda_div >= 0.0):
            raise InvalidParameter(f"lambda_div must be >= 0, got {self.lambda_div}")
        if not (0.0 < self.eps <= 1e-3):
            raise InvalidParameter(f"eps must be in (0, 1e-3], got {self.eps}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term values plus the weighted total for one forward pass."""

    sim: float
    sim_inverse: float
    aug: float
    diversity: float
    external: float
    total: float


def masked_pool(
    frames: np.ndarray,
    mask: Mask,
    mode: PoolingMode = PoolingMode.PLAIN_MEAN,
    eps: float = 1e-8,
) -> PooledEmbedding:
    """Pool frame embeddings under a mask.

    plain_mean:    (1/N) sum_j w_j f_j
    mask_weighted: sum_j w_j f_j / max(sum_j w_j, eps)
    """
    f = np.asarray(frames, dtype=np.float64)
    w = np.asarray(mask.weights, dtype=np.float64)
    if f.ndim != 2:
        raise ShapeError(f"frames must be (N, D), got shape {f.shape}")
    if w.shape != (f.shape[0],):
        raise ShapeError(f"mask length {w.shape} does not match {f.shape[0]} frames")
    weighted = w @ f
    if mode == PoolingMode.PLAIN_MEAN:
        vec = weighted / f.shape[0]
    elif mode == PoolingMode.MASK_WEIGHTED:
        vec = weighted / max(float(w.sum()), eps)
    else:
        raise InvalidParameter(f"unknown pooling mode {mode!r}")
    return PooledEmbedding(vector=vec, source_mask_kind=mask.kind)


def cosine(a: np.ndarray, b: np.ndarray, eps: float = 1e-8) -> float:
    """Cosine similarity with norm floors: a.b / (max(|a|,eps) max(|b|,eps))."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = max(float(np.linalg.norm(a)), eps)
    nb = max(float(np.linalg.norm(b)), eps)
    return float(a @ b) / (na * nb)


def _as_vector(p) -> np.ndarray:
    return p.vector if isinstance(p, PooledEmbedding) else np.asarray(p, dtype=np.float64)


def _check_video_pair(pooled_v, captions_v) -> np.ndarray:
    cap = np.asarray(captions_v, dtype=np.float64)
    if cap.ndim != 2 or cap.shape[0] < 1:
        raise ShapeError(f"captions must be (K, D) with K >= 1, got {cap.shape}")
    if len(pooled_v) != cap.shape[0]:
        raise ShapeError(
            f"{len(pooled_v)} pooled embeddings vs {cap.shape[0]} captions"
        )
    return cap


def sim_loss(
    pooled: Sequence[Sequence],
    captions: Sequence[np.ndarray],
    margin: float = 0.1,
    eps: float = 1e-8,
) -> float:
    """Margin-ranking loss with the hardest other caption as negative."""
    if len(pooled) == 0:
        raise EmptyBatch("sim_loss needs at least one video")
    if len(pooled) != len(captions):
        raise ShapeError(f"{len(pooled)} pooled videos vs {len(captions)} caption sets")
    total = 0.0
    for pooled_v, captions_v in zip(pooled, captions):
        cap = _check_video_pair(pooled_v, captions_v)
        k = cap.shape[0]
        acc = 0.0
        for i, p in enumerate(pooled_v):
            v = _as_vector(p)
            s_plus = cosine(v, cap[i], eps)
            s_minus = 0.0
            if k > 1:
                sims = [cosine(v, cap[j], eps) for j in range(k) if j != i]
                s_minus = max(sims)
            acc += max(0.0, margin - s_plus + s_minus)
        total += acc / k
    return total / len(pooled)


def sim_loss_inverse(
    inverse_pooled: Sequence[Sequence],
    captions: Sequence[np.ndarray],
    margin: float = 0.1,
    eps: float = 1e-8,
) -> float:
    """Margin-ranking loss on complement pools.

    Positive target: mean of the other captions. Hard negative: the
    event's own caption. Single-event videos contribute zero.
    """
    if len(inverse_pooled) == 0:
        raise EmptyBatch("sim_loss_inverse needs at least one video")
    if len(inverse_pooled) != len(captions):
        raise ShapeError(
            f"{len(inverse_pooled)} pooled videos vs {len(captions)} caption sets"
        )
    total = 0.0
    for pooled_v, captions_v in zip(inverse_pooled, captions):
        cap = _check_video_pair(pooled_v, captions_v)
        k = cap.shape[0]
        if k < 2:
            continue
        acc = 0.0
        cap_sum = cap.sum(axis=0)
        for i, p in enumerate(pooled_v):
            v = _as_vector(p)
            rest_mean = (cap_sum - cap[i]) / (k - 1)
            s_plus = cosine(v, rest_mean, eps)
            s_minus = cosine(v, cap[i], eps)
            acc += max(0.0, margin - s_plus + s_minus)
        total += acc / k
    return total / len(inverse_pooled)


def aug_loss(
    inter_pooled: Sequence[Sequence],
    syn_captions: Sequence[np.ndarray | None],
    eps: float = 1e-8,
) -> float:
    """Cosine-distance loss between transition pools and synthetic captions.

    Each video contributes the mean of 1 - cos over its K - 1 transition
    pairs; videos without pairs (or without synthetic captions) are
    skipped but still count toward the batch denominator.
    """
    if len(inter_pooled) == 0:
        raise EmptyBatch("aug_loss needs at least one video")
    if len(inter_pooled) != len(syn_captions):
        raise ShapeError(
            f"{len(inter_pooled)} pooled videos vs {len(syn_captions)} synthetic sets"
        )
    total = 0.0
    for pooled_v, syn_v in zip(inter_pooled, syn_captions):
        n = len(pooled_v)
        if n == 0:
            continue
        if syn_v is None:
            raise ShapeError("video has transition pools but no synthetic captions")
        syn = np.asarray(syn_v, dtype=np.float64)
        if syn.shape[0] != n:
            raise ShapeError(f"{n} transition pools vs {syn.shape[0]} synthetic captions")
        acc = 0.0
        for p, s in zip(pooled_v, syn):
            acc += 1.0 - cosine(_as_vector(p), s, eps)
        total += acc / n
    return total / len(inter_pooled)


def diversity_loss(masks: Sequence[Mask], eps: float = 1e-8) -> float:
    """Mean pairwise cosine between one video's mask weight vectors.

    A single mask yields 0 by definition.
    """
    k = len(masks)
    if k == 0:
        raise EmptyBatch("diversity_loss needs at least one mask")
    if k == 1:
        return 0.0
    rows = [np.asarray(m.weights, dtype=np.float64) for m in masks]
    n = rows[0].shape[0]
    for r in rows:
        if r.shape != (n,):
            raise ShapeError("all masks must share one frame grid")
    acc = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            acc += cosine(rows[i], rows[j], eps)
    return acc / (k * (k - 1) / 2)


def total_loss(
    sim: float,
    sim_inverse: float,
    aug: float,
    diversity: float,
    cfg: LossConfig,
    external: float = 0.0,
) -> LossBreakdown:
    """Combine the terms under the configured weights.

    total = sim + sim_inverse + lambda_div * diversity + alpha_aug * aug
            + external
    """
    parts = (sim, sim_inverse, aug, diversity, external)
    if not all(math.isfinite(p) for p in parts):
        names = ("sim", "sim_inverse", "aug", "diversity", "external")
        bad = ", ".join(n for n, p in zip(names, parts) if not math.isfinite(p))
        raise NumericalError(f"non-finite loss term(s): {bad}")
    total = (
        sim
        + sim_inverse
        + cfg.lambda_div * diversity
        + cfg.alpha_aug * aug
        + external
    )
    return LossBreakdown(
        sim=sim,
        sim_inverse=sim_inverse,
        aug=aug,
        diversity=diversity,
        external=external,
        total=total,
    )
