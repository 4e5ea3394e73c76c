"""Synthetic embedding corpora with known event layouts.

Each video gets per-event prototype embeddings plus a background
prototype and one prototype per annotated transition gap, all drawn as
random unit vectors redrawn until every pairwise |cosine| <= 0.3. Frames
inside an event carry its prototype, frames in an annotated gap the
transition prototype, all others the background prototype; i.i.d.
gaussian noise is added per frame. Caption embeddings equal the event
prototypes (the unit-normalized mean of the segment's noiseless
frames). Everything derives from np.random.default_rng([seed, index]),
so video i is reproducible in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dataio import Dataset, VideoSample
from .errors import EmptyEvents, InvalidParameter, LayoutError

_MAX_PROTO_COS = 0.3
_UNIFORM_GAP_FRACTION = 0.1
_NONUNIF_LEN_FRACTION = (0.42, 0.60)
_HETERO_WIDTH_LO = 0.05
_HETERO_WIDTH_HI = 0.3


class Layout(str, Enum):
    UNIFORM = "uniform"
    NON_UNIFORM = "non_uniform"
    HETEROGENEOUS_DURATIONS = "heterogeneous_durations"


@dataclass(frozen=True)
class ScenarioSpec:
    n_videos: int = 20
    n_frames: int = 64
    embed_dim: int = 16
    events_min: int = 3
    events_max: int = 3
    layout: Layout = Layout.NON_UNIFORM
    noise_sigma: float = 0.05
    transition_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_videos < 1:
            raise InvalidParameter(f"n_videos must be >= 1, got {self.n_videos}")
        if self.n_frames < 4:
            raise InvalidParameter(f"n_frames must be >= 4, got {self.n_frames}")
        if self.embed_dim < 2:
            raise InvalidParameter(f"embed_dim must be >= 2, got {self.embed_dim}")
        if not 1 <= self.events_min <= self.events_max:
            raise InvalidParameter(
                f"need 1 <= events_min <= events_max, got {self.events_min}..{self.events_max}"
            )
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise InvalidParameter(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.transition_fraction <= 1.0:
            raise InvalidParameter(
                f"transition_fraction must be in [0, 1], got {self.transition_fraction}"
            )
        if self.seed < 0:
            raise InvalidParameter(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class Event:
    start: float
    end: float
    caption: np.ndarray
    orig_index: int


@dataclass
class SyntheticVideo:
    video_id: str
    index: int
    frames: np.ndarray
    events: list[Event]
    # original gap index (gap i sits after event i) -> transition prototype
    transitions: dict[int, np.ndarray] = field(default_factory=dict)
    # complete ground truth, unchanged by sparsification
    gt_all: list[tuple[float, float]] = field(default_factory=list)

    @property
    def n_events(self) -> int:
        return len(self.events)


def _unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Random unit vectors with pairwise |cos| <= 0.3, drawn one at a time."""
    rows = np.empty((count, dim))
    for i in range(count):
        for attempt in range(2000):
            v = rng.standard_normal(dim)
            norm = float(np.linalg.norm(v))
            if norm < 1e-12:
                continue
            v /= norm
            if i == 0 or float(np.max(np.abs(rows[:i] @ v))) <= _MAX_PROTO_COS:
                rows[i] = v
                break
        else:
            raise LayoutError(
                f"cannot place {count} near-orthogonal prototypes in {dim} dims"
            )
    return rows


def _layout_segments(
    rng: np.random.Generator, layout: Layout, k: int, n_frames: int
) -> list[tuple[float, float]]:
    if layout == Layout.UNIFORM:
        # equal cells, with the middle 90% of each cell covered by its event
        half_gap = _UNIFORM_GAP_FRACTION / 2
        return [((i + half_gap) / k, (i + 1 - half_gap) / k) for i in range(k)]
    if layout == Layout.NON_UNIFORM:
        # jittered-cell layout: one event per equal cell, with random unequal
        # lengths and jittered centers, so events stay disjoint and ordered
        # while spacing and duration vary per video
        cell = 1.0 / k
        pad = 0.1 * cell
        lo = max(2.0 / n_frames, _NONUNIF_LEN_FRACTION[0] * cell)
        hi = _NONUNIF_LEN_FRACTION[1] * cell
        if lo >= hi:
            raise LayoutError(
                f"cells of {cell:.3f} cannot hold events of at least {lo:.3f}"
            )
        segments = []
        for i in range(k):
            ln = rng.uniform(lo, hi)
            slack = (cell - ln) / 2.0 - pad
            c = (i + 0.5) * cell + rng.uniform(-slack, slack)
            segments.append((c - ln / 2.0, c + ln / 2.0))
        return segments
    else:  # heterogeneous durations
        lengths = np.exp(
            rng.uniform(math.log(_HETERO_WIDTH_LO), math.log(_HETERO_WIDTH_HI), size=k)
        )
        total = float(lengths.sum())
        if total > 0.85:
            lengths *= 0.85 / total
            total = 0.85
        gaps = (1.0 - total) * rng.dirichlet(np.ones(k + 1))
    segments = []
    at = float(gaps[0])
    for i in range(k):
        segments.append((at, at + float(lengths[i])))
        at += float(lengths[i]) + float(gaps[i + 1])
    return segments


def gen_video(spec: ScenarioSpec, index: int) -> SyntheticVideo:
    """Generate video `index` of the scenario, deterministic in (seed, index)."""
    if index < 0:
        raise InvalidParameter(f"index must be >= 0, got {index}")
    rng = np.random.default_rng([spec.seed, index])
    k = int(rng.integers(spec.events_min, spec.events_max + 1))
    segments = _layout_segments(rng, spec.layout, k, spec.n_frames)
    for (s0, e0), (s1, _) in zip(segments, segments[1:]):
        if not (0.0 <= s0 < e0 <= s1):
            raise LayoutError(f"overlapping or unordered segments: {segments}")
    if segments[-1][1] > 1.0:
        raise LayoutError(f"segments exceed the unit interval: {segments}")

    protos = _unit_rows(rng, 2 * k, spec.embed_dim)
    event_protos = protos[:k]
    background = protos[k]
    transition_protos = protos[k + 1 :]

    n_annotated = math.ceil(spec.transition_fraction * (k - 1))
    annotated: list[int] = []
    if n_annotated > 0:
        annotated = sorted(int(i) for i in rng.choice(k - 1, size=n_annotated, replace=False))

    t = (np.arange(spec.n_frames) + 0.5) / spec.n_frames
    frames = np.empty((spec.n_frames, spec.embed_dim))
    for j, tj in enumerate(t):
        proto = background
        for i, (s, e) in enumerate(segments):
            if s <= tj <= e:
                proto = event_protos[i]
                break
        else:
            for g in annotated:
                if segments[g][1] < tj < segments[g + 1][0]:
                    proto = transition_protos[g]
                    break
        frames[j] = proto
    frames += spec.noise_sigma * rng.standard_normal(frames.shape)

    events = [
        Event(start=s, end=e, caption=event_protos[i].copy(), orig_index=i)
        for i, (s, e) in enumerate(segments)
    ]
    return SyntheticVideo(
        video_id=f"vid{index:04d}",
        index=index,
        frames=frames,
        events=events,
        transitions={g: transition_protos[g].copy() for g in annotated},
        gt_all=list(segments),
    )


def gen_dataset(spec: ScenarioSpec) -> list[SyntheticVideo]:
    return [gen_video(spec, i) for i in range(spec.n_videos)]


@dataclass(frozen=True)
class SparsifyPolicy:
    keep_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.keep_ratio <= 1.0:
            raise InvalidParameter(f"keep_ratio must be in (0, 1], got {self.keep_ratio}")


def sparsify(video: SyntheticVideo, policy: SparsifyPolicy) -> SyntheticVideo:
    """Uniformly drop annotations, keeping ceil(keep_ratio * K) events.

    Temporal order and the full ground truth (`gt_all`) are preserved;
    frames are untouched, so dropped events stay in the video content.
    """
    k = video.n_events
    if k == 0:
        raise EmptyEvents(f"video {video.video_id} has no events")
    keep = math.ceil(policy.keep_ratio * k)
    rng = np.random.default_rng([policy.seed, video.index])
    chosen = sorted(int(i) for i in rng.choice(k, size=keep, replace=False))
    return SyntheticVideo(
        video_id=video.video_id,
        index=video.index,
        frames=video.frames,
        events=[video.events[i] for i in chosen],
        transitions=dict(video.transitions),
        gt_all=list(video.gt_all),
    )


def oracle_transition_embeddings(video: SyntheticVideo) -> np.ndarray:
    """Ground-truth stand-ins for synthetic transition captions.

    One row per adjacent retained-event pair: the gap's transition
    prototype when the pair is originally adjacent and its gap is
    annotated, otherwise the unit-normalized mean of the two flanking
    captions. Shape (n_events - 1, D); empty for single-event videos.
    """
    dim = video.frames.shape[1]
    if video.n_events < 2:
        return np.empty((0, dim))
    rows = []
    for a, b in zip(video.events, video.events[1:]):
        proto = None
        if b.orig_index == a.orig_index + 1:
            proto = video.transitions.get(a.orig_index)
        if proto is None:
            mean = (a.caption + b.caption) / 2.0
            proto = mean / max(float(np.linalg.norm(mean)), 1e-12)
        rows.append(proto)
    return np.stack(rows)


def to_dataset(
    videos: list[SyntheticVideo],
    spec: ScenarioSpec,
    with_synthetic: bool = True,
) -> Dataset:
    """Convert simulator output into the training dataset form."""
    if not videos:
        raise EmptyEvents("no videos to convert")
    samples = []
    for v in videos:
        if v.n_events == 0:
            raise EmptyEvents(f"video {v.video_id} has no events")
        syn = oracle_transition_embeddings(v) if (with_synthetic and v.n_events >= 2) else None
        samples.append(
            VideoSample(
                video_id=v.video_id,
                frames=v.frames,
                captions=np.stack([e.caption for e in v.events]),
                synthetic=syn,
                gt_segments=[(e.start, e.end) for e in v.events],
                gt_segments_all=list(v.gt_all),
            )
        )
    return Dataset(n_frames=spec.n_frames, embed_dim=spec.embed_dim, videos=samples)


def dataset_stats(videos: list[SyntheticVideo]) -> dict[str, float]:
    """Corpus summary: events per video and covered duration fraction."""
    if not videos:
        raise EmptyEvents("no videos to summarize")
    events = [v.n_events for v in videos]
    coverage = [sum(e.end - e.start for e in v.events) for v in videos]
    return {
        "n_videos": float(len(videos)),
        "events_per_video_mean": float(np.mean(events)),
        "events_per_video_min": float(min(events)),
        "events_per_video_max": float(max(events)),
        "coverage_mean": float(np.mean(coverage)),
        "transition_gaps_annotated": float(sum(len(v.transitions) for v in videos)),
    }
