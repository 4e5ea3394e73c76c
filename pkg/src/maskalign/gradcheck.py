"""Finite-difference verification of the analytic gradients.

Central differences with step h on float64 copies, compared coordinate
by coordinate with relative error |a - b| / max(|a|, |b|, 1e-8). The
loss surface has hinge kinks and hard-negative argmax switches, so the
instance sampler rejects draws that put any margin or argmax gap within
1e-3 of a switch; the comparison is only valid on smooth neighborhoods.

hard_binary masks have an almost-everywhere-zero true derivative, so
their training gradient is a gaussian-kernel surrogate. For that kind
the harness checks the surrogate chain (the gaussian path at identical
parameters) and says so in the report.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataio import RunConfig, VideoSample
from .errors import InvalidParameter
from .losses import PoolingMode
from .masks import MaskKind
from .optim import ParamSet, backward, constrain_arrays

TERM_CONFIGS: dict[str, dict] = {
    "sim": dict(sim=True, inverse=False, alpha_aug=0.0, lambda_div=0.0),
    "sim_inverse": dict(sim=False, inverse=True, alpha_aug=0.0, lambda_div=0.0),
    "aug": dict(sim=False, inverse=False, alpha_aug=0.25, lambda_div=0.0),
    "diversity": dict(sim=False, inverse=False, alpha_aug=0.0, lambda_div=1.0),
    "total": dict(sim=True, inverse=True, alpha_aug=0.25, lambda_div=0.7),
}


def finite_diff_grad(loss_fn, x0: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    if not h > 0:
        raise InvalidParameter(f"h must be > 0, got {h}")
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.empty_like(x0)
    for i in range(x0.size):
        hi = x0.copy()
        lo = x0.copy()
        hi[i] += h
        lo[i] -= h
        grad[i] = (loss_fn(hi) - loss_fn(lo)) / (2.0 * h)
    return grad


def relative_errors(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def _margin_gaps(videos, params: ParamSet, config: RunConfig) -> list[float]:
    """Distances to every hinge kink and argmax tie, via the reference ops.

    Uses masks/losses building blocks rather than the fused kernels so
    the rejection filter is independent of the code under test.
    """
    from .losses import cosine, masked_pool
    from .masks import EngineConfig, Mask, make_mask, mask_rows

    gaps: list[float] = []
    for v, rc, rw in zip(videos, params.raw_centers, params.raw_widths):
        c, w, _, _ = constrain_arrays(rc, rw, config.width_max)
        cfg = EngineConfig(
            n_frames=v.frames.shape[0],
            temperature=config.temperature,
            width_max=config.width_max,
        )
        rows = mask_rows(config.mask_kind, c, w, cfg)
        k = v.captions.shape[0]
        pooled = [
            masked_pool(v.frames, Mask(rows[i], config.mask_kind), config.pooling_mode)
            for i in range(k)
        ]
        for i in range(k):
            s_plus = cosine(pooled[i].vector, v.captions[i])
            others = sorted(
                (cosine(pooled[i].vector, v.captions[j]) for j in range(k) if j != i),
                reverse=True,
            )
            s_minus = others[0] if others else 0.0
            gaps.append(abs(config.margin - s_plus + s_minus))
            if len(others) > 1:
                gaps.append(abs(others[0] - others[1]))
        if k > 1:
            inv_pooled = [
                masked_pool(v.frames, Mask(1.0 - rows[i], config.mask_kind), config.pooling_mode)
                for i in range(k)
            ]
            cap_sum = v.captions.sum(axis=0)
            for i in range(k):
                rest = (cap_sum - v.captions[i]) / (k - 1)
                s_plus = cosine(inv_pooled[i].vector, rest)
                s_minus = cosine(inv_pooled[i].vector, v.captions[i])
                gaps.append(abs(config.margin - s_plus + s_minus))
    return gaps


def make_instance(
    rng: np.random.Generator,
    mask_kind: MaskKind,
    max_videos: int = 2,
    max_events: int = 5,
    max_frames: int = 32,
    max_dim: int = 8,
    kink_gap: float = 1e-3,
) -> tuple[list[VideoSample], ParamSet, RunConfig]:
    """One randomized gradient-check instance on a smooth neighborhood."""
    base = RunConfig(
        temperature=4.0,
        margin=0.1,
        w_inter=0.6,
        mask_kind=mask_kind,
        pooling_mode=(PoolingMode.PLAIN_MEAN, PoolingMode.MASK_WEIGHTED)[
            int(rng.integers(2))
        ],
    )
    for _ in range(200):
        b = int(rng.integers(1, max_videos + 1))
        n = int(rng.integers(4, max_frames + 1))
        d = int(rng.integers(2, max_dim + 1))
        videos, centers, widths = [], [], []
        for i in range(b):
            k = int(rng.integers(2, max_events + 1)) if i == 0 else int(rng.integers(1, max_events + 1))
            videos.append(
                VideoSample(
                    video_id=f"g{i}",
                    frames=rng.standard_normal((n, d)),
                    captions=rng.standard_normal((k, d)),
                    synthetic=rng.standard_normal((k - 1, d)) if k > 1 else None,
                )
            )
            centers.append(rng.uniform(-1.5, 1.5, size=k))
            widths.append(rng.uniform(-1.5, 1.5, size=k))
        params = ParamSet(raw_centers=centers, raw_widths=widths)
        if min(_margin_gaps(videos, params, base)) > kink_gap:
            return videos, params, base
    raise RuntimeError("could not sample an instance away from hinge kinks")


@dataclass
class GradCheckReport:
    mask_kind: MaskKind
    backend: str
    tolerance: float
    instances: int
    max_rel_err: dict[str, float]
    passed: bool
    elapsed: float
    surrogate_note: str | None = None

    def lines(self) -> list[str]:
        out = []
        for term, err in self.max_rel_err.items():
            status = "ok" if err <= self.tolerance else "FAIL"
            out.append(f"{term:12s} max_rel_err={err:.3e} {status}")
        out.append(
            f"{'overall':12s} instances={self.instances} "
            f"elapsed={self.elapsed:.2f}s {'PASS' if self.passed else 'FAIL'}"
        )
        if self.surrogate_note:
            out.append(self.surrogate_note)
        return out


def run_gradcheck(
    trials: int = 100,
    seed: int = 0,
    mask_kind: MaskKind = MaskKind.GAUSSIAN,
    tolerance: float = 1e-4,
    h: float = 1e-5,
    backend: str | None = None,
) -> GradCheckReport:
    """Compare analytic and finite-difference gradients per loss term."""
    from . import kernels
    from dataclasses import replace

    if trials < 1:
        raise InvalidParameter(f"trials must be >= 1, got {trials}")
    note = None
    check_kind = mask_kind
    if mask_kind == MaskKind.HARD_BINARY:
        check_kind = MaskKind.GAUSSIAN
        note = (
            "hard_binary uses the gaussian straight-through surrogate; "
            "this check covers that surrogate path only"
        )
    start = time.perf_counter()
    worst = {term: 0.0 for term in TERM_CONFIGS}
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        videos, params, base = make_instance(rng, check_kind)
        counts = params.event_counts()
        for term, flags in TERM_CONFIGS.items():
            cfg = replace(
                base,
                sim=flags["sim"],
                inverse=flags["inverse"],
                alpha_aug=flags["alpha_aug"],
                lambda_div=flags["lambda_div"],
            )
            _, grads = backward(videos, params, cfg, backend=backend)
            analytic = grads.flatten()

            def loss_at(x: np.ndarray) -> float:
                ps = ParamSet.from_flat(counts, x)
                bd, _ = backward(videos, ps, cfg, backend=backend)
                return bd.total

            numeric = finite_diff_grad(loss_at, params.flatten(), h=h)
            err = float(relative_errors(analytic, numeric).max())
            worst[term] = max(worst[term], err)
    elapsed = time.perf_counter() - start
    resolved = kernels.BACKEND if backend in (None, "auto") else backend
    return GradCheckReport(
        mask_kind=mask_kind,
        backend=resolved,
        tolerance=tolerance,
        instances=trials,
        max_rel_err=worst,
        passed=all(e <= tolerance for e in worst.values()),
        elapsed=elapsed,
        surrogate_note=note,
    )
