"""embridge: offline exporter from annotated videos to the embedding
dataset interchange format, plus LLM-based transition-caption
augmentation with a replayable transcript."""

from .annotations import VideoAnnotation, load_annotations
from .augment import (
    SYSTEM_PROMPT,
    USER_TEMPLATE,
    AugmentationJob,
    AugmentReport,
    build_user_prompt,
    fallback_caption,
    run_augment,
)
from .embfile import read_matrix, write_matrix
from .encoders import MockEncoder, register_encoder, resolve_encoder
from .errors import (
    AnnotationError,
    DecodeError,
    EncoderError,
    ExportError,
    FormatError,
    GenerationError,
    IoError,
    ReplayError,
)
from .extract import (
    DATASET_FRAME_COUNTS,
    ExportJob,
    ExtractReport,
    frame_indices,
    run_extract,
)
from .llm import HttpCompletionClient, MockClient, ReplayClient, load_transcript

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "AugmentationJob",
    "AugmentReport",
    "DATASET_FRAME_COUNTS",
    "DecodeError",
    "EncoderError",
    "ExportError",
    "ExportJob",
    "ExtractReport",
    "FormatError",
    "GenerationError",
    "HttpCompletionClient",
    "IoError",
    "MockClient",
    "MockEncoder",
    "ReplayClient",
    "ReplayError",
    "SYSTEM_PROMPT",
    "USER_TEMPLATE",
    "VideoAnnotation",
    "build_user_prompt",
    "fallback_caption",
    "frame_indices",
    "load_annotations",
    "load_transcript",
    "read_matrix",
    "register_encoder",
    "resolve_encoder",
    "run_augment",
    "run_extract",
    "write_matrix",
]
