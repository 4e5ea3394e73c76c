"""Temporal localization metrics over normalized [0, 1] segments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EmptyGroundTruth, EmptyResult, InvalidParameter
from .masks import MaskParams

THRESHOLDS = (0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class Segment:
    start: float
    end: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise InvalidParameter(f"segment must be finite, got ({self.start}, {self.end})")
        if not 0.0 <= self.start < self.end <= 1.0:
            raise InvalidParameter(
                f"need 0 <= start < end <= 1, got ({self.start}, {self.end})"
            )

    @property
    def length(self) -> float:
        return self.end - self.start


def mask_to_segment(params: MaskParams, n_frames: int) -> Segment:
    """Decode a mask as the interval [c - w/2, c + w/2], clipped to [0, 1].

    If clipping leaves nothing (possible only for centers hugging a
    boundary), fall back to a one-frame window around the center so the
    prediction stays scoreable.
    """
    if n_frames < 1:
        raise InvalidParameter(f"n_frames must be >= 1, got {n_frames}")
    lo = max(0.0, params.center - params.width / 2)
    hi = min(1.0, params.center + params.width / 2)
    if hi - lo <= 0.0:
        half = 0.5 / n_frames
        lo = max(0.0, params.center - half)
        hi = min(1.0, params.center + half)
        if hi - lo <= 0.0:
            lo, hi = 0.0, min(1.0, 1.0 / n_frames)
    return Segment(lo, hi)


def temporal_iou(a: Segment, b: Segment) -> float:
    inter = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    if inter == 0.0:
        return 0.0
    union = a.length + b.length - inter
    return inter / union


def _iou_matrix(preds: list[Segment], gts: list[Segment]) -> np.ndarray:
    m = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            m[i, j] = temporal_iou(p, g)
    return m


@dataclass(frozen=True)
class LocReport:
    thresholds: tuple[float, ...]
    recall: tuple[float, ...]
    precision: tuple[float, ...]
    recall_avg: float
    precision_avg: float
    f1: float
    label: str = ""


def _f1(recall: float, precision: float) -> float:
    if recall + precision <= 0.0:
        return 0.0
    return 2.0 * recall * precision / (recall + precision)


def _report(
    thresholds: tuple[float, ...],
    recall: list[float],
    precision: list[float],
    label: str,
) -> LocReport:
    r_avg = float(np.mean(recall))
    p_avg = float(np.mean(precision))
    return LocReport(
        thresholds=tuple(thresholds),
        recall=tuple(recall),
        precision=tuple(precision),
        recall_avg=r_avg,
        precision_avg=p_avg,
        f1=_f1(r_avg, p_avg),
        label=label,
    )


def localization_scores(
    preds: list[Segment],
    gts: list[Segment],
    thresholds: tuple[float, ...] = THRESHOLDS,
    one_to_one: bool = False,
    label: str = "",
) -> LocReport:
    """Recall and precision at IoU thresholds for one video.

    Default mode scores each side against its best counterpart; with
    one_to_one=True predictions are first matched to ground truth by a
    maximum-IoU assignment and only matched pairs can score.
    """
    if not gts:
        raise EmptyGroundTruth("no ground truth segments to score against")
    if not thresholds:
        raise InvalidParameter("need at least one IoU threshold")
    if not preds:
        zeros = [0.0] * len(thresholds)
        return _report(thresholds, zeros, zeros, label)
    iou = _iou_matrix(preds, gts)
    if one_to_one:
        rows, cols = linear_sum_assignment(-iou)
        matched = iou[rows, cols]
        recall = [float((matched >= th).sum()) / len(gts) for th in thresholds]
        precision = [float((matched >= th).sum()) / len(preds) for th in thresholds]
    else:
        best_for_gt = iou.max(axis=0)
        best_for_pred = iou.max(axis=1)
        recall = [float((best_for_gt >= th).mean()) for th in thresholds]
        precision = [float((best_for_pred >= th).mean()) for th in thresholds]
    return _report(thresholds, recall, precision, label)


def corpus_scores(
    pairs: list[tuple[list[Segment], list[Segment]]],
    thresholds: tuple[float, ...] = THRESHOLDS,
    one_to_one: bool = False,
    label: str = "",
) -> LocReport:
    """Average per-video recall/precision across a corpus."""
    if not pairs:
        raise EmptyResult("no videos to score")
    reports = [
        localization_scores(p, g, thresholds=thresholds, one_to_one=one_to_one)
        for p, g in pairs
    ]
    recall = [float(np.mean([r.recall[i] for r in reports])) for i in range(len(thresholds))]
    precision = [
        float(np.mean([r.precision[i] for r in reports])) for i in range(len(thresholds))
    ]
    return _report(thresholds, recall, precision, label)


def mean_best_iou(preds: list[Segment], gts: list[Segment]) -> float:
    """Mean over ground-truth segments of the best IoU any prediction gives."""
    if not gts:
        raise EmptyGroundTruth("no ground truth segments to score against")
    if not preds:
        return 0.0
    return float(_iou_matrix(preds, gts).max(axis=0).mean())


def corpus_mean_best_iou(pairs: list[tuple[list[Segment], list[Segment]]]) -> float:
    if not pairs:
        raise EmptyResult("no videos to score")
    return float(np.mean([mean_best_iou(p, g) for p, g in pairs]))


@dataclass(frozen=True)
class WidthStats:
    per_video_std: tuple[float, ...]
    mean_std: float
    min_std: float
    max_std: float


def width_stats(widths_per_video: list[list[float]]) -> WidthStats:
    """Population standard deviation of learned widths, per video.

    Videos with fewer than two events carry no spread information and
    are skipped; if none remain the statistic is undefined.
    """
    stds = [float(np.std(w)) for w in widths_per_video if len(w) >= 2]
    if not stds:
        raise EmptyResult("no video has two or more widths")
    return WidthStats(
        per_video_std=tuple(stds),
        mean_std=float(np.mean(stds)),
        min_std=float(min(stds)),
        max_std=float(max(stds)),
    )


def report_kv(report: LocReport) -> str:
    """Render a report as one key=value per line, stable ordering."""
    lines = []
    prefix = f"{report.label}." if report.label else ""
    for th, r in zip(report.thresholds, report.recall):
        lines.append(f"{prefix}recall@{th:g}={r:.6f}")
    for th, p in zip(report.thresholds, report.precision):
        lines.append(f"{prefix}precision@{th:g}={p:.6f}")
    lines.append(f"{prefix}recall_avg={report.recall_avg:.6f}")
    lines.append(f"{prefix}precision_avg={report.precision_avg:.6f}")
    lines.append(f"{prefix}f1={report.f1:.6f}")
    return "\n".join(lines)


def report_csv(reports: list[LocReport]) -> str:
    """Render reports as CSV, one row per report."""
    if not reports:
        raise EmptyResult("no reports to render")
    thresholds = reports[0].thresholds
    for r in reports:
        if r.thresholds != thresholds:
            raise InvalidParameter("reports use differing thresholds")
    head = ["label"]
    head += [f"recall@{th:g}" for th in thresholds]
    head += [f"precision@{th:g}" for th in thresholds]
    head += ["recall_avg", "precision_avg", "f1"]
    rows = [",".join(head)]
    for r in reports:
        cells = [r.label]
        cells += [f"{v:.6f}" for v in r.recall]
        cells += [f"{v:.6f}" for v in r.precision]
        cells += [f"{r.recall_avg:.6f}", f"{r.precision_avg:.6f}", f"{r.f1:.6f}"]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"
