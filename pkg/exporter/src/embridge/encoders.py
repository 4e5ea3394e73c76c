"""Encoder resolution.

Encoders are named at runtime; only the deterministic mock ships here.
Real backbones (e.g. "clip-vit-l/14") register through
register_encoder so the package stays importable offline.

The mock maps any string key to a unit vector via a SHA-256 seeded
draw, so frame and caption embeddings are reproducible across runs and
processes. Text embeddings stand in for an encoder's end-of-sequence
pooled output.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Protocol

import numpy as np

from .annotations import VideoAnnotation
from .errors import DecodeError, EncoderError

DEFAULT_DIM = 16


class Encoder(Protocol):
    dim: int

    def video_frame_count(self, video: VideoAnnotation) -> int: ...

    def encode_frames(self, video: VideoAnnotation, indices: list[int]) -> np.ndarray: ...

    def encode_texts(self, texts: list[str]) -> np.ndarray: ...


def _unit_vector(key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dim)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:  # unreachable in practice, keeps the contract total
        v[0] = 1.0
        norm = 1.0
    return v / norm


class MockEncoder:
    """Hash-seeded stand-in used by tests and offline runs."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise EncoderError("dim must be >= 1")
        self.dim = dim

    def video_frame_count(self, video: VideoAnnotation) -> int:
        # the mock treats the annotated source frame count as the decode result
        if video.source_frames is None or video.source_frames < 1:
            raise DecodeError(f"{video.id}: no decodable frames")
        return video.source_frames

    def encode_frames(self, video: VideoAnnotation, indices: list[int]) -> np.ndarray:
        rows = [_unit_vector(f"{video.id}/frame/{i}", self.dim) for i in indices]
        return np.stack(rows) if rows else np.zeros((0, self.dim))

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        rows = [_unit_vector(f"text/{t}", self.dim) for t in texts]
        return np.stack(rows) if rows else np.zeros((0, self.dim))


_REGISTRY: dict[str, Callable[[int], Encoder]] = {
    "mock": MockEncoder,
}


def register_encoder(name: str, factory: Callable[[int], Encoder]) -> None:
    _REGISTRY[name] = factory


def resolve_encoder(name: str, dim: int = DEFAULT_DIM) -> Encoder:
    factory = _REGISTRY.get(name)
    if factory is None:
        raise EncoderError(
            f"encoder {name!r} is not available; bundled: {sorted(_REGISTRY)} "
            "(real backbones must be registered by the hosting environment)"
        )
    return factory(dim)
