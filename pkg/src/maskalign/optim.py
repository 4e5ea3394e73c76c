"""Parameter handling, AdamW, and the deterministic training loop.

Mask parameters live as unconstrained logits, one (center, width) pair
per event. Training runs single-stage mini-batch gradient descent: each
epoch shuffles the video order from the run seed, batches are consumed
in order, and every step updates the full parameter vector (videos
outside the batch contribute zero gradient). Identical seed and config
on the same backend reproduce the loss history and final parameters
bit for bit; wall-clock time is the one report field outside that
guarantee.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataio import Dataset, RunConfig, VideoSample
from .errors import (
    EmptyBatch,
    EmptyDataset,
    InvalidParameter,
    NumericalError,
    ShapeError,
)
from .losses import LossBreakdown, LossConfig, PoolingMode, total_loss
from .masks import MaskKind, MaskParams, constrain_arrays, fixed_uniform_params

_KIND_CODE = {
    MaskKind.GAUSSIAN: kernels.GAUSSIAN,
    MaskKind.CAUCHY: kernels.CAUCHY,
    MaskKind.HARD_BINARY: kernels.HARD_BINARY,
}
_POOL_CODE = {
    PoolingMode.PLAIN_MEAN: kernels.POOL_PLAIN,
    PoolingMode.MASK_WEIGHTED: kernels.POOL_WEIGHTED,
}
_EPS = 1e-8


@dataclass
class ParamSet:
    """Unconstrained mask parameters for every video, one array pair each.

    The flat layout concatenates [centers_v, widths_v] per video in
    dataset order; GradientSet shares the structure.
    """

    raw_centers: list[np.ndarray]
    raw_widths: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.raw_centers) != len(self.raw_widths):
            raise ShapeError("raw_centers and raw_widths must pair up per video")
        for c, w in zip(self.raw_centers, self.raw_widths):
            if c.shape != w.shape or c.ndim != 1 or c.size < 1:
                raise ShapeError(f"bad parameter block shapes {c.shape} vs {w.shape}")

    @property
    def n_videos(self) -> int:
        return len(self.raw_centers)

    def event_counts(self) -> list[int]:
        return [c.size for c in self.raw_centers]

    def flatten(self) -> np.ndarray:
        blocks = []
        for c, w in zip(self.raw_centers, self.raw_widths):
            blocks.append(c)
            blocks.append(w)
        return np.concatenate(blocks)

    @classmethod
    def from_flat(cls, event_counts: list[int], flat: np.ndarray) -> "ParamSet":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != 2 * sum(event_counts):
            raise ShapeError(
                f"flat vector of {flat.size} values cannot hold {event_counts} events"
            )
        centers, widths, at = [], [], 0
        for k in event_counts:
            centers.append(flat[at : at + k].copy())
            widths.append(flat[at + k : at + 2 * k].copy())
            at += 2 * k
        return cls(raw_centers=centers, raw_widths=widths)


GradientSet = ParamSet


def zeros_like(params: ParamSet) -> ParamSet:
    return ParamSet(
        raw_centers=[np.zeros_like(c) for c in params.raw_centers],
        raw_widths=[np.zeros_like(w) for w in params.raw_widths],
    )


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-9, 1.0 - 1e-9)
    return np.log(p / (1.0 - p))


def init_params(videos: list[VideoSample], config: RunConfig) -> ParamSet:
    """Fixed-uniform initialization: the constrained values reproduce
    `fixed_uniform_params` for each video's event count (widths clip to
    the logit range when 1/K reaches width_max)."""
    if not videos:
        raise EmptyDataset("cannot initialize parameters for zero videos")
    centers, widths = [], []
    for v in videos:
        base = fixed_uniform_params(v.n_events)
        centers.append(_logit(np.array([p.center for p in base])))
        widths.append(_logit(np.array([p.width for p in base]) / config.width_max))
    return ParamSet(raw_centers=centers, raw_widths=widths)


def constrained_params(params: ParamSet, config: RunConfig) -> list[list[MaskParams]]:
    """Constrained MaskParams per video."""
    out = []
    for rc, rw in zip(params.raw_centers, params.raw_widths):
        c, w, _, _ = constrain_arrays(rc, rw, config.width_max)
        out.append([MaskParams(center=ci, width=wi) for ci, wi in zip(c, w)])
    return out


def backward(
    videos: list[VideoSample],
    params: ParamSet,
    config: RunConfig,
    indices: list[int] | None = None,
    external: float = 0.0,
    backend: str | None = None,
) -> tuple[LossBreakdown, ParamSet]:
    """Loss breakdown and analytic gradient for a mini-batch.

    Gradients are with respect to the raw logits, averaged over the
    batch; videos outside `indices` get zero blocks.
    """
    if len(videos) != params.n_videos:
        raise ShapeError(f"{len(videos)} videos vs {params.n_videos} parameter blocks")
    if indices is None:
        indices = list(range(len(videos)))
    if len(indices) == 0:
        raise EmptyBatch("backward needs at least one video index")
    kern = kernels.get_kernel(backend)
    kind = _KIND_CODE[config.mask_kind]
    pool = _POOL_CODE[config.pooling_mode]
    grads = zeros_like(params)
    b = float(len(indices))
    sim_sum = inv_sum = aug_sum = div_sum = 0.0
    for vi in indices:
        v = videos[vi]
        if v.captions.shape[0] != params.raw_centers[vi].size:
            raise ShapeError(
                f"video {v.video_id}: {v.captions.shape[0]} captions vs "
                f"{params.raw_centers[vi].size} parameter pairs"
            )
        c, w, jc, jw = constrain_arrays(
            params.raw_centers[vi], params.raw_widths[vi], config.width_max
        )
        sim, inv, aug, div, dc, dw = kern(
            v.frames,
            v.captions,
            v.synthetic,
            c,
            w,
            kind,
            pool,
            config.temperature,
            config.margin,
            config.w_inter,
            config.alpha_aug,
            config.lambda_div,
            config.sim,
            config.inverse,
            _EPS,
        )
        if not (np.all(np.isfinite(dc)) and np.all(np.isfinite(dw))):
            raise NumericalError(f"non-finite gradient for video {v.video_id}")
        grads.raw_centers[vi] = dc * jc / b
        grads.raw_widths[vi] = dw * jw / b
        sim_sum += sim
        inv_sum += inv
        aug_sum += aug
        div_sum += div
    loss_cfg = LossConfig(
        margin=config.margin,
        alpha_aug=config.alpha_aug,
        lambda_div=config.lambda_div,
        pooling=config.pooling_mode,
        eps=_EPS,
    )
    breakdown = total_loss(
        sim_sum / b, inv_sum / b, aug_sum / b, div_sum / b, loss_cfg, external
    )
    return breakdown, grads


def loss_value(
    videos: list[VideoSample],
    params: ParamSet,
    config: RunConfig,
    indices: list[int] | None = None,
    external: float = 0.0,
    backend: str | None = None,
) -> LossBreakdown:
    """Forward-only convenience wrapper around `backward`."""
    return backward(videos, params, config, indices, external, backend)[0]


class AdamW:
    """AdamW with bias-corrected moments and decoupled weight decay.

    update: p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
    """

    def __init__(
        self,
        n_params: int,
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> None:
        if n_params < 1:
            raise InvalidParameter(f"n_params must be >= 1, got {n_params}")
        if not (math.isfinite(lr) and lr > 0):
            raise InvalidParameter(f"lr must be > 0, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise InvalidParameter(f"betas must be in [0, 1), got {beta1}, {beta2}")
        if not (math.isfinite(eps) and eps > 0):
            raise InvalidParameter(f"eps must be > 0, got {eps}")
        if not (math.isfinite(weight_decay) and weight_decay >= 0):
            raise InvalidParameter(f"weight_decay must be >= 0, got {weight_decay}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        grads = np.asarray(grads, dtype=np.float64)
        if params.shape != self.m.shape or grads.shape != self.m.shape:
            raise ShapeError(
                f"expected shape {self.m.shape}, got params {params.shape}, grads {grads.shape}"
            )
        if not np.all(np.isfinite(grads)):
            raise NumericalError("non-finite gradient passed to AdamW.step")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * (
            m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * params
        )


@dataclass
class TrainReport:
    """Outcome of one training run.

    Everything except wall_clock is bit-reproducible from (config, seed,
    backend).
    """

    history: list[LossBreakdown]
    final_params: list[list[MaskParams]]
    video_ids: list[str]
    seed: int
    steps: int
    backend: str
    wall_clock: float


def train(
    dataset: Dataset,
    config: RunConfig,
    seed: int | None = None,
    external_fn=None,
    backend: str | None = None,
) -> TrainReport:
    """Run the full training loop on a loaded dataset.

    `external_fn(batch_videos) -> float` may supply an extra scalar term
    that is added to the reported total; it carries no gradient.
    """
    videos = dataset.videos
    if not videos:
        raise EmptyDataset("train needs at least one video")
    run_seed = config.seed if seed is None else seed
    rng = np.random.default_rng(run_seed)
    params = init_params(videos, config)
    counts = params.event_counts()
    flat = params.flatten()
    opt = AdamW(flat.size, lr=config.lr, weight_decay=config.weight_decay)
    history: list[LossBreakdown] = []
    queue: list[int] = []
    start = time.perf_counter()
    for step in range(config.steps):
        if not queue:
            queue = [int(i) for i in rng.permutation(len(videos))]
        batch = queue[: config.batch_size]
        queue = queue[config.batch_size :]
        current = ParamSet.from_flat(counts, flat)
        external = float(external_fn([videos[i] for i in batch])) if external_fn else 0.0
        breakdown, grads = backward(
            videos, current, config, indices=batch, external=external, backend=backend
        )
        flat = opt.step(flat, grads.flatten())
        if not np.all(np.isfinite(flat)):
            raise NumericalError(f"non-finite parameters after step {step}")
        history.append(breakdown)
    elapsed = time.perf_counter() - start
    final = ParamSet.from_flat(counts, flat)
    resolved = kernels.BACKEND if backend in (None, "auto") else backend
    return TrainReport(
        history=history,
        final_params=constrained_params(final, config),
        video_ids=[v.video_id for v in videos],
        seed=run_seed,
        steps=config.steps,
        backend=resolved,
        wall_clock=elapsed,
    )
