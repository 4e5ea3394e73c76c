"""Dataset, parameter, and config serialization.

Binary embedding file layout (all integers little-endian):

    bytes 0..7    magic b"SAILEMB1"
    bytes 8..11   u32 version, currently 1
    bytes 12..15  u32 dim  (columns, >= 1)
    bytes 16..19  u32 count (rows, >= 0)
    bytes 20..    count * dim float32 values, row-major

The payload length must match the header exactly; trailing bytes,
truncation, a bad magic, or an unknown version raise FormatError, and
non-finite values raise NumericalError. Matrices are float32 on disk
and float64 in memory, so a write/read round trip is bit-lossless for
every finite float32 including signed zeros and subnormals.

Manifest schema (JSON, embedding paths relative to the manifest's
directory unless absolute):

    {
      "schema_version": 1,
      "n_frames": 64,
      "embed_dim": 16,
      "videos": [
        {
          "id": "vid0000",
          "frames": "vid0000.frames.emb",
          "captions": "vid0000.captions.emb",
          "synthetic": "vid0000.synthetic.emb",
          "gt_segments": [[0.10, 0.32], [0.41, 0.77]],
          "gt_segments_all": [[0.10, 0.32], [0.41, 0.77], [0.80, 0.95]]
        }
      ]
    }

"synthetic", "gt_segments", and "gt_segments_all" are optional. Caption
order defines event order. "synthetic" must hold exactly caption_count-1
rows (one per adjacent caption pair); its absence disables the
augmentation loss for that video. "gt_segments" holds one [start, end]
per caption with 0 <= start < end <= 1. "gt_segments_all" carries the
complete ground truth for evaluation, which may exceed the annotated
caption count (sparsified annotations); evaluation falls back to
"gt_segments" when it is absent. load_dataset validates everything and
never partially succeeds.

RunConfig serializes as a flat key=value text file whose keys are the
long CLI flag names of the train command ("#" lines are comments).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    InvalidParameter,
    IoError,
    NumericalError,
    SchemaError,
    ShapeError,
)
from .losses import PoolingMode
from .masks import MaskKind

MAGIC = b"SAILEMB1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<III")


def write_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    """Write a (count, dim) matrix in the binary embedding format."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"embedding matrix must be 2-D, got shape {m.shape}")
    if m.shape[1] < 1:
        raise ShapeError(f"embedding dim must be >= 1, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("refusing to write non-finite embeddings")
    with np.errstate(over="ignore"):
        payload = np.ascontiguousarray(m, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise NumericalError("values overflow float32")
    blob = MAGIC + _HEADER.pack(FORMAT_VERSION, m.shape[1], m.shape[0]) + payload.tobytes()
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_embeddings(path: str | Path) -> np.ndarray:
    """Read a binary embedding file into a float64 (count, dim) array."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(data) < 8 + _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0: {data[:8]!r}")
    version, dim, count = _HEADER.unpack_from(data, 8)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise FormatError(f"{path}: dim must be >= 1, got {dim}")
    expected = 8 + _HEADER.size + 4 * dim * count
    if len(data) < expected:
        raise FormatError(
            f"{path}: truncated payload, expected {expected} bytes, got {len(data)}"
        )
    if len(data) > expected:
        raise FormatError(
            f"{path}: {len(data) - expected} trailing bytes after payload"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=8 + _HEADER.size)
    matrix = flat.reshape(count, dim).astype(np.float64)
    if not np.all(np.isfinite(matrix)):
        raise NumericalError(f"{path}: payload contains non-finite values")
    return matrix


@dataclass
class VideoSample:
    """One video's embeddings plus optional ground truth."""

    video_id: str
    frames: np.ndarray
    captions: np.ndarray
    synthetic: np.ndarray | None = None
    gt_segments: list[tuple[float, float]] | None = None
    gt_segments_all: list[tuple[float, float]] | None = None

    @property
    def n_events(self) -> int:
        return int(self.captions.shape[0])

    @property
    def eval_segments(self) -> list[tuple[float, float]] | None:
        """Ground truth for evaluation: the full set when recorded."""
        return self.gt_segments_all if self.gt_segments_all is not None else self.gt_segments


@dataclass
class Dataset:
    n_frames: int
    embed_dim: int
    videos: list[VideoSample] = field(default_factory=list)


def _check_segments(segs, label: str, vid: str) -> list[tuple[float, float]]:
    if not isinstance(segs, list) or not segs:
        raise SchemaError(f"video {vid}: {label} must be a non-empty list")
    out = []
    for seg in segs:
        if not (isinstance(seg, (list, tuple)) and len(seg) == 2):
            raise SchemaError(f"video {vid}: {label} entries must be [start, end]")
        s, e = float(seg[0]), float(seg[1])
        if not (math.isfinite(s) and math.isfinite(e) and 0.0 <= s < e <= 1.0):
            raise SchemaError(
                f"video {vid}: {label} needs 0 <= start < end <= 1, got [{s}, {e}]"
            )
        out.append((s, e))
    return out


def load_dataset(manifest_path: str | Path) -> Dataset:
    """Load and fully validate a dataset; raises instead of partially loading."""
    manifest_path = Path(manifest_path)
    try:
        raw = manifest_path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {manifest_path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{manifest_path}: manifest root must be an object")
    if doc.get("schema_version") != 1:
        raise SchemaError(
            f"{manifest_path}: unsupported schema_version {doc.get('schema_version')!r}"
        )
    for key in ("n_frames", "embed_dim", "videos"):
        if key not in doc:
            raise SchemaError(f"{manifest_path}: missing key {key!r}")
    n_frames = int(doc["n_frames"])
    embed_dim = int(doc["embed_dim"])
    if n_frames < 2:
        raise SchemaError(f"{manifest_path}: n_frames must be >= 2, got {n_frames}")
    if embed_dim < 1:
        raise SchemaError(f"{manifest_path}: embed_dim must be >= 1, got {embed_dim}")
    if not isinstance(doc["videos"], list):
        raise SchemaError(f"{manifest_path}: videos must be a list")

    base = manifest_path.parent
    seen: set[str] = set()
    videos: list[VideoSample] = []
    for entry in doc["videos"]:
        if not isinstance(entry, dict):
            raise SchemaError(f"{manifest_path}: video entries must be objects")
        vid = entry.get("id")
        if not isinstance(vid, str) or not vid:
            raise SchemaError(f"{manifest_path}: every video needs a non-empty id")
        if vid in seen:
            raise SchemaError(f"{manifest_path}: duplicate video id {vid!r}")
        seen.add(vid)
        for key in ("frames", "captions"):
            if not isinstance(entry.get(key), str):
                raise SchemaError(f"video {vid}: missing embedding path {key!r}")

        frames = read_embeddings(base / entry["frames"])
        if frames.shape != (n_frames, embed_dim):
            raise SchemaError(
                f"video {vid}: frames shape {frames.shape} does not match "
                f"(n_frames, embed_dim) = ({n_frames}, {embed_dim})"
            )
        captions = read_embeddings(base / entry["captions"])
        if captions.ndim != 2 or captions.shape[0] < 1 or captions.shape[1] != embed_dim:
            raise SchemaError(
                f"video {vid}: captions shape {captions.shape} invalid for dim {embed_dim}"
            )
        k = captions.shape[0]

        synthetic = None
        if entry.get("synthetic") is not None:
            if not isinstance(entry["synthetic"], str):
                raise SchemaError(f"video {vid}: synthetic must be a path")
            synthetic = read_embeddings(base / entry["synthetic"])
            if synthetic.shape != (k - 1, embed_dim):
                raise SchemaError(
                    f"video {vid}: synthetic count must be caption count - 1 = {k - 1},"
                    f" got shape {synthetic.shape}"
                )

        gt = None
        if entry.get("gt_segments") is not None:
            gt = _check_segments(entry["gt_segments"], "gt_segments", vid)
            if len(gt) != k:
                raise SchemaError(
                    f"video {vid}: {len(gt)} gt_segments for {k} captions"
                )
        gt_all = None
        if entry.get("gt_segments_all") is not None:
            gt_all = _check_segments(entry["gt_segments_all"], "gt_segments_all", vid)

        videos.append(
            VideoSample(
                video_id=vid,
                frames=frames,
                captions=captions,
                synthetic=synthetic,
                gt_segments=gt,
                gt_segments_all=gt_all,
            )
        )
    return Dataset(n_frames=n_frames, embed_dim=embed_dim, videos=videos)


def write_dataset(dataset: Dataset, out_dir: str | Path, name: str = "manifest.json") -> Path:
    """Write embedding files plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    entries = []
    for v in dataset.videos:
        frames_name = f"{v.video_id}.frames.emb"
        captions_name = f"{v.video_id}.captions.emb"
        write_embeddings(v.frames, out / frames_name)
        write_embeddings(v.captions, out / captions_name)
        entry: dict = {"id": v.video_id, "frames": frames_name, "captions": captions_name}
        if v.synthetic is not None:
            syn_name = f"{v.video_id}.synthetic.emb"
            write_embeddings(v.synthetic, out / syn_name)
            entry["synthetic"] = syn_name
        if v.gt_segments is not None:
            entry["gt_segments"] = [[s, e] for s, e in v.gt_segments]
        if v.gt_segments_all is not None:
            entry["gt_segments_all"] = [[s, e] for s, e in v.gt_segments_all]
        entries.append(entry)
    doc = {
        "schema_version": 1,
        "n_frames": dataset.n_frames,
        "embed_dim": dataset.embed_dim,
        "videos": entries,
    }
    manifest_path = out / name
    try:
        manifest_path.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {manifest_path}: {exc}") from exc
    return manifest_path


@dataclass(frozen=True)
class RunConfig:
    """Every training knob; field names map 1:1 to train CLI flags."""

    temperature: float = 4.0
    margin: float = 0.1
    w_inter: float = 0.6
    alpha_aug: float = 0.25
    lambda_div: float = 0.0
    pooling_mode: PoolingMode = PoolingMode.PLAIN_MEAN
    mask_kind: MaskKind = MaskKind.GAUSSIAN
    lr: float = 1e-4
    batch_size: int = 8
    steps: int = 3000
    seed: int = 0
    sim: bool = True
    inverse: bool = True
    weight_decay: float = 0.0
    width_max: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise InvalidParameter(f"temperature must be > 0, got {self.temperature}")
        if not (math.isfinite(self.margin) and self.margin >= 0):
            raise InvalidParameter(f"margin must be >= 0, got {self.margin}")
        if not (math.isfinite(self.w_inter) and 0 < self.w_inter <= 1):
            raise InvalidParameter(f"w-inter must be in (0, 1], got {self.w_inter}")
        if not (math.isfinite(self.alpha_aug) and self.alpha_aug >= 0):
            raise InvalidParameter(f"alpha-aug must be >= 0, got {self.alpha_aug}")
        if not (math.isfinite(self.lambda_div) and self.lambda_div >= 0):
            raise InvalidParameter(f"lambda-div must be >= 0, got {self.lambda_div}")
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise InvalidParameter(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise InvalidParameter(f"batch-size must be >= 1, got {self.batch_size}")
        if self.steps < 1:
            raise InvalidParameter(f"steps must be >= 1, got {self.steps}")
        if self.seed < 0:
            raise InvalidParameter(f"seed must be >= 0, got {self.seed}")
        if not (math.isfinite(self.weight_decay) and self.weight_decay >= 0):
            raise InvalidParameter(f"weight-decay must be >= 0, got {self.weight_decay}")
        if not (math.isfinite(self.width_max) and 0 < self.width_max <= 1):
            raise InvalidParameter(f"width-max must be in (0, 1], got {self.width_max}")


# attribute -> key (and long CLI flag) name
RUNCONFIG_KEYS: dict[str, str] = {
    f.name: f.name.replace("_", "-") for f in fields(RunConfig)
}
_KEY_TO_ATTR = {v: k for k, v in RUNCONFIG_KEYS.items()}


def _parse_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise SchemaError(f"config key {key!r}: expected a boolean, got {text!r}")


def save_runconfig(cfg: RunConfig, path: str | Path) -> None:
    """Write a RunConfig as flat key=value text, keys in field order."""
    lines = []
    for attr, key in RUNCONFIG_KEYS.items():
        value = getattr(cfg, attr)
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, (PoolingMode, MaskKind)):
            rendered = value.value
        else:
            rendered = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key}={rendered}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_runconfig(path: str | Path) -> RunConfig:
    """Parse a key=value config file into a RunConfig."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SchemaError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        attr = _KEY_TO_ATTR.get(key)
        if attr is None:
            raise SchemaError(f"{path}:{lineno}: unknown config key {key!r}")
        current = getattr(cfg, attr)
        try:
            if isinstance(current, bool):
                parsed = _parse_bool(value, key)
            elif isinstance(current, int):
                parsed = int(value)
            elif isinstance(current, float):
                parsed = float(value)
            elif isinstance(current, PoolingMode):
                parsed = PoolingMode(value)
            else:
                parsed = MaskKind(value)
        except (ValueError, KeyError) as exc:
            raise SchemaError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from exc
        try:
            cfg = replace(cfg, **{attr: parsed})
        except InvalidParameter as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return cfg


def write_params_json(
    video_ids: list[str],
    params: list[list],
    path: str | Path,
) -> None:
    """Persist per-video mask parameters (lists of MaskParams)."""
    if len(video_ids) != len(params):
        raise ShapeError(f"{len(video_ids)} ids vs {len(params)} parameter lists")
    doc = {
        "videos": [
            {
                "id": vid,
                "centers": [p.center for p in plist],
                "widths": [p.width for p in plist],
            }
            for vid, plist in zip(video_ids, params)
        ]
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_params_json(path: str | Path) -> list[tuple[str, list[float], list[float]]]:
    """Read back write_params_json output as (id, centers, widths) tuples."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        raise FormatError(f"{path}: empty params file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("videos"), list):
        raise SchemaError(f"{path}: expected an object with a videos list")
    out = []
    for entry in doc["videos"]:
        if not isinstance(entry, dict):
            raise SchemaError(f"{path}: video entries must be objects")
        vid = entry.get("id")
        centers = entry.get("centers")
        widths = entry.get("widths")
        if not isinstance(vid, str) or not isinstance(centers, list) or not isinstance(widths, list):
            raise SchemaError(f"{path}: entries need id, centers, widths")
        if len(centers) != len(widths):
            raise SchemaError(f"{path}: video {vid}: centers/widths length mismatch")
        out.append((vid, [float(c) for c in centers], [float(w) for w in widths]))
    return out


def write_step_records(history, path: str | Path) -> None:
    """One JSON record per training step, loss terms plus total."""
    lines = []
    for step, bd in enumerate(history):
        lines.append(
            json.dumps(
                {
                    "step": step,
                    "sim": bd.sim,
                    "sim_inverse": bd.sim_inverse,
                    "aug": bd.aug,
                    "diversity": bd.diversity,
                    "external": bd.external,
                    "total": bd.total,
                }
            )
        )
    try:
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
