"""Differentiable temporal masks over a normalized frame grid.

A video with N frames puts frame j at t_j = (j + 0.5) / N on the unit
interval. A mask assigns each frame a weight in [0, 1] from a kernel
with center c in (0, 1) and width w in (0, width_max]:

    gaussian     exp(-(t - c)^2 / (2 (w / tau)^2))
    cauchy       1 / (1 + ((t - c) / (w / tau))^2)
    hard_binary  1 if |t - c| <= w / 2 else 0

tau sharpens the soft kernels relative to the nominal width. The hard
kernel has no usable derivative, so its training gradient is borrowed
from the gaussian kernel at the same parameters (straight-through
surrogate); `mask_partials` implements that convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateWidth, EmptyEvents, InvalidParameter, ShapeError

# Constrained values are clipped to the nearest representables inside the
# open interval so extreme logits cannot round to an endpoint.
_OPEN_LO = 1e-300
_OPEN_HI = 1.0 - 2.0 ** -53


class MaskKind(str, Enum):
    GAUSSIAN = "gaussian"
    CAUCHY = "cauchy"
    HARD_BINARY = "hard_binary"


@dataclass(frozen=True)
class EngineConfig:
    """Grid size and kernel settings shared by every mask of a video."""

    n_frames: int
    temperature: float = 4.0
    width_max: float = 1.0

    def __post_init__(self) -> None:
        if self.n_frames < 2:
            raise InvalidParameter(f"n_frames must be >= 2, got {self.n_frames}")
        if not (math.isfinite(self.temperature) and self.temperature > 0.0):
            raise InvalidParameter(f"temperature must be finite and > 0, got {self.temperature}")
        if not (math.isfinite(self.width_max) and 0.0 < self.width_max <= 1.0):
            raise InvalidParameter(f"width_max must be in (0, 1], got {self.width_max}")


@dataclass(frozen=True)
class RawMaskParams:
    """Unconstrained per-event parameters as seen by the optimizer."""

    raw_center: float
    raw_width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.raw_center) and math.isfinite(self.raw_width)):
            raise InvalidParameter(
                f"raw params must be finite, got ({self.raw_center}, {self.raw_width})"
            )


@dataclass(frozen=True)
class MaskParams:
    """Constrained mask parameters: center in (0, 1), width > 0."""

    center: float
    width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.center) and 0.0 < self.center < 1.0):
            raise InvalidParameter(f"center must be in (0, 1), got {self.center}")
        if not (math.isfinite(self.width) and self.width > 0.0):
            raise InvalidParameter(f"width must be > 0, got {self.width}")


@dataclass(frozen=True)
class Mask:
    """Per-frame weights in [0, 1] plus the kernel kind that produced them."""

    weights: np.ndarray
    kind: MaskKind


def frame_times(n_frames: int) -> np.ndarray:
    """Midpoint timestamps t_j = (j + 0.5) / n_frames."""
    if n_frames < 1:
        raise InvalidParameter(f"n_frames must be >= 1, got {n_frames}")
    return (np.arange(n_frames, dtype=np.float64) + 0.5) / n_frames


def _logistic(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def constrain(raw: RawMaskParams, width_max: float = 1.0) -> MaskParams:
    """Map unconstrained logits to valid mask parameters.

    center = logistic(raw_center); width = width_max * logistic(raw_width).
    Smooth and strictly monotone in both coordinates.
    """
    if not (math.isfinite(width_max) and 0.0 < width_max <= 1.0):
        raise InvalidParameter(f"width_max must be in (0, 1], got {width_max}")
    c = min(max(_logistic(raw.raw_center), _OPEN_LO), _OPEN_HI)
    w = width_max * min(max(_logistic(raw.raw_width), _OPEN_LO), _OPEN_HI)
    return MaskParams(center=c, width=w)


def constrain_arrays(
    raw_centers: np.ndarray, raw_widths: np.ndarray, width_max: float = 1.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized `constrain` plus the diagonal Jacobian of each map.

    Returns (centers, widths, dcenter_draw, dwidth_draw). The Jacobians
    use the unclipped logistic derivative; outside the clip range it is
    zero to machine precision anyway.
    """
    rc = np.asarray(raw_centers, dtype=np.float64)
    rw = np.asarray(raw_widths, dtype=np.float64)
    if not (np.all(np.isfinite(rc)) and np.all(np.isfinite(rw))):
        raise InvalidParameter("raw parameters must be finite")
    sc = 1.0 / (1.0 + np.exp(-rc))
    sw = 1.0 / (1.0 + np.exp(-rw))
    centers = np.clip(sc, _OPEN_LO, _OPEN_HI)
    widths = width_max * np.clip(sw, _OPEN_LO, _OPEN_HI)
    return centers, widths, sc * (1.0 - sc), width_max * sw * (1.0 - sw)


def mask_rows(
    kind: MaskKind, centers: np.ndarray, widths: np.ndarray, cfg: EngineConfig
) -> np.ndarray:
    """Evaluate K masks on the frame grid, returned as a (K, N) array."""
    centers = np.atleast_1d(np.asarray(centers, dtype=np.float64))
    widths = np.atleast_1d(np.asarray(widths, dtype=np.float64))
    if centers.shape != widths.shape:
        raise ShapeError(f"centers {centers.shape} vs widths {widths.shape}")
    scale = widths / cfg.temperature
    if np.any(scale == 0.0):
        raise DegenerateWidth("width / temperature underflowed to zero")
    t = frame_times(cfg.n_frames)
    d = t[None, :] - centers[:, None]
    if kind == MaskKind.GAUSSIAN:
        return np.exp(-(d * d) / (2.0 * scale * scale)[:, None])
    if kind == MaskKind.CAUCHY:
        u = d / scale[:, None]
        return 1.0 / (1.0 + u * u)
    if kind == MaskKind.HARD_BINARY:
        return (np.abs(d) <= (widths / 2.0)[:, None]).astype(np.float64)
    raise InvalidParameter(f"unknown mask kind {kind!r}")


def mask_partials(
    kind: MaskKind, centers: np.ndarray, widths: np.ndarray, cfg: EngineConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of each mask weight w.r.t. center and width.

    Shapes (K, N). For hard_binary these are the gaussian kernel's
    partials at the same parameters (the training surrogate); callers
    that need the true a.e.-zero derivative should not call this.
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=np.float64))
    widths = np.atleast_1d(np.asarray(widths, dtype=np.float64))
    if centers.shape != widths.shape:
        raise ShapeError(f"centers {centers.shape} vs widths {widths.shape}")
    scale = widths / cfg.temperature
    if np.any(scale == 0.0):
        raise DegenerateWidth("width / temperature underflowed to zero")
    t = frame_times(cfg.n_frames)
    d = t[None, :] - centers[:, None]
    s2 = (scale * scale)[:, None]
    if kind == MaskKind.CAUCHY:
        u = d / scale[:, None]
        m = 1.0 / (1.0 + u * u)
        m2 = m * m
        d_center = 2.0 * d * m2 / s2
        d_width = 2.0 * (d * d) * m2 / (scale ** 3 * cfg.temperature)[:, None]
        return d_center, d_width
    # gaussian, and the gaussian surrogate used by hard_binary
    m = np.exp(-(d * d) / (2.0 * s2))
    d_center = m * d / s2
    d_width = m * (d * d) / (scale ** 3 * cfg.temperature)[:, None]
    return d_center, d_width


def make_mask(kind: MaskKind, params: MaskParams, cfg: EngineConfig) -> Mask:
    """Build one mask from constrained parameters."""
    if params.width > cfg.width_max:
        raise InvalidParameter(
            f"width {params.width} exceeds width_max {cfg.width_max}"
        )
    row = mask_rows(kind, np.array([params.center]), np.array([params.width]), cfg)[0]
    return Mask(weights=row, kind=MaskKind(kind))


def inverse_mask(mask: Mask) -> Mask:
    """Complement mask: weights 1 - w, same kind."""
    return Mask(weights=1.0 - mask.weights, kind=mask.kind)


def inter_mask_params(a: MaskParams, b: MaskParams, w_inter: float) -> MaskParams:
    """Parameters of the transition mask between two adjacent events.

    Center is the mean of the two event centers; width is the fixed
    w_inter and receives no gradient during training.
    """
    if not (math.isfinite(w_inter) and w_inter > 0.0):
        raise InvalidParameter(f"w_inter must be > 0, got {w_inter}")
    return MaskParams(center=(a.center + b.center) / 2.0, width=w_inter)


def inter_centers(centers: np.ndarray) -> np.ndarray:
    """Pairwise means of consecutive centers, shape (K - 1,)."""
    c = np.asarray(centers, dtype=np.float64)
    if c.size < 2:
        return np.empty(0, dtype=np.float64)
    return (c[:-1] + c[1:]) / 2.0


def fixed_uniform_params(n_events: int) -> list[MaskParams]:
    """Evenly tiled untrained baseline: centers (i + 0.5) / n, widths 1 / n."""
    if n_events < 1:
        raise EmptyEvents(f"n_events must be >= 1, got {n_events}")
    w = 1.0 / n_events
    return [MaskParams(center=(i + 0.5) / n_events, width=w) for i in range(n_events)]


def fixed_uniform_masks(n_events: int, cfg: EngineConfig) -> list[Mask]:
    """Gaussian masks at the fixed uniform tiling."""
    return [make_mask(MaskKind.GAUSSIAN, p, cfg) for p in fixed_uniform_params(n_events)]
