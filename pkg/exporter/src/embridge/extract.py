"""Frame and caption embedding extraction.

Turns an annotation file plus an encoder into the interchange layout:
one frames file and one captions file per video, tied together by a
manifest. Frame sampling is uniform by floor index:

    indices[i] = floor(i * n_source / n_target),  i in [0, n_target)

so a 64-frame source sampled to 32 takes every second frame, and a
source shorter than the target repeats frames rather than failing.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import embfile
from .annotations import VideoAnnotation
from .encoders import DEFAULT_DIM, Encoder, resolve_encoder
from .errors import AnnotationError, DecodeError

log = logging.getLogger("embridge")

# per-dataset frame budgets
DATASET_FRAME_COUNTS = {"activitynet": 32, "youcook2": 100}

SCHEMA_VERSION = 1


@dataclass
class ExportJob:
    videos: list[VideoAnnotation]
    frames_per_video: int
    encoder: str = "mock"
    embed_dim: int = DEFAULT_DIM
    out_dir: str | Path = "."


@dataclass
class ExtractReport:
    manifest_path: Path
    written: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)


def frame_indices(n_source: int, n_target: int) -> list[int]:
    if n_source < 1:
        raise DecodeError("source has no frames")
    if n_target < 1:
        raise AnnotationError("n_target must be >= 1")
    return [i * n_source // n_target for i in range(n_target)]


def _gt_segments(video: VideoAnnotation) -> list[list[float]] | None:
    if video.timestamps is None or video.duration is None:
        return None
    segs = []
    for s, e in video.timestamps:
        if e > video.duration:
            raise AnnotationError(
                f"{video.id}: timestamp end {e} exceeds duration {video.duration}"
            )
        segs.append([s / video.duration, min(1.0, e / video.duration)])
    return segs


def run_extract(job: ExportJob, encoder: Encoder | None = None) -> ExtractReport:
    """Write embeddings and a manifest for every exportable video.

    Videos without captions or without decodable frames are skipped
    with a logged reason and recorded on the report; everything else
    is all-or-nothing per video.
    """
    if job.frames_per_video < 1:
        raise AnnotationError("frames_per_video must be >= 1")
    if not job.videos:
        raise AnnotationError("no videos to export")
    enc = encoder if encoder is not None else resolve_encoder(job.encoder, job.embed_dim)
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = ExtractReport(manifest_path=out_dir / "manifest.json")
    entries = []
    for video in job.videos:
        if not video.captions:
            log.warning("skipping %s: no captions", video.id)
            report.skipped.append((video.id, "no captions"))
            continue
        try:
            n_source = enc.video_frame_count(video)
            indices = frame_indices(n_source, job.frames_per_video)
            frames = enc.encode_frames(video, indices)
            captions = enc.encode_texts(list(video.captions))
        except DecodeError as exc:
            log.warning("skipping %s: %s", video.id, exc)
            report.skipped.append((video.id, str(exc)))
            continue
        frames_name = f"{video.id}.frames.emb"
        captions_name = f"{video.id}.captions.emb"
        embfile.write_matrix(frames, out_dir / frames_name)
        embfile.write_matrix(captions, out_dir / captions_name)
        entry = {"id": video.id, "frames": frames_name, "captions": captions_name}
        segs = _gt_segments(video)
        if segs is not None:
            entry["gt_segments"] = segs
        entries.append(entry)
        report.written.append(video.id)

    if not entries:
        raise AnnotationError("every video was skipped; nothing to write")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "n_frames": job.frames_per_video,
        "embed_dim": enc.dim,
        "videos": entries,
    }
    report.manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return report
