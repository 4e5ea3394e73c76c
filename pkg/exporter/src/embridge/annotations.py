"""Annotation file loading.

Input is a JSON document:

    {
      "videos": [
        {
          "id": "v1",
          "captions": ["text", ...],
          "n_frames": 64,                # source frame count, optional
          "duration": 120.0,             # seconds, optional
          "timestamps": [[0.0, 30.0]]    # seconds, optional, one per caption
        }
      ]
    }

"captions" are ordered by time. "timestamps", when present, must match
the caption count, have start < end, and be sorted by start. "n_frames"
is what the decoder reports for the source; the mock encoder reads it
directly, real encoders may ignore it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import AnnotationError, IoError


@dataclass(frozen=True)
class VideoAnnotation:
    id: str
    captions: tuple[str, ...]
    source_frames: int | None = None
    duration: float | None = None
    timestamps: tuple[tuple[float, float], ...] | None = None


def _parse_video(doc: dict, index: int) -> VideoAnnotation:
    where = f"videos[{index}]"
    if not isinstance(doc, dict):
        raise AnnotationError(f"{where}: expected an object")
    vid = doc.get("id")
    if not isinstance(vid, str) or not vid:
        raise AnnotationError(f"{where}: 'id' must be a non-empty string")
    caps = doc.get("captions")
    if not isinstance(caps, list) or any(not isinstance(c, str) for c in caps):
        raise AnnotationError(f"{where}: 'captions' must be a list of strings")

    n_frames = doc.get("n_frames")
    if n_frames is not None and (not isinstance(n_frames, int) or n_frames < 0):
        raise AnnotationError(f"{where}: 'n_frames' must be a non-negative integer")

    duration = doc.get("duration")
    if duration is not None:
        if not isinstance(duration, (int, float)) or duration <= 0:
            raise AnnotationError(f"{where}: 'duration' must be positive")
        duration = float(duration)

    stamps = doc.get("timestamps")
    parsed_stamps = None
    if stamps is not None:
        if not isinstance(stamps, list) or len(stamps) != len(caps):
            raise AnnotationError(
                f"{where}: 'timestamps' must hold one [start, end] per caption"
            )
        pairs = []
        for j, pair in enumerate(stamps):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or any(not isinstance(x, (int, float)) for x in pair)
            ):
                raise AnnotationError(f"{where}.timestamps[{j}]: expected [start, end]")
            s, e = float(pair[0]), float(pair[1])
            if not s < e:
                raise AnnotationError(f"{where}.timestamps[{j}]: start must be < end")
            pairs.append((s, e))
        for (s0, _), (s1, _) in zip(pairs, pairs[1:]):
            if s1 < s0:
                raise AnnotationError(f"{where}: timestamps must be sorted by start")
        parsed_stamps = tuple(pairs)

    return VideoAnnotation(
        id=vid,
        captions=tuple(caps),
        source_frames=n_frames,
        duration=duration,
        timestamps=parsed_stamps,
    )


def load_annotations(path: str | Path) -> list[VideoAnnotation]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("videos"), list):
        raise AnnotationError(f"{path}: expected an object with a 'videos' list")
    videos = [_parse_video(v, i) for i, v in enumerate(doc["videos"])]
    seen: set[str] = set()
    for v in videos:
        if v.id in seen:
            raise AnnotationError(f"duplicate video id {v.id!r}")
        seen.add(v.id)
    return videos
