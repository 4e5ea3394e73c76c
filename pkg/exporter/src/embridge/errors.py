"""Error hierarchy for the exporter.

Everything raised on purpose derives from ExportError so callers can
catch one type at the boundary. The CLI maps AnnotationError to exit 2
(bad input) and the data-shaped errors to exit 3.
"""


class ExportError(Exception):
    """Base class for all exporter errors."""


class AnnotationError(ExportError):
    """Annotation file is malformed or inconsistent."""


class IoError(ExportError):
    """A required file is missing or unreadable."""


class DecodeError(ExportError):
    """A video source cannot be decoded into frames."""


class EncoderError(ExportError):
    """Encoder identifier cannot be resolved or the encoder misbehaved."""


class GenerationError(ExportError):
    """A single language-model completion attempt failed."""


class ReplayError(ExportError):
    """Transcript replay diverged from the recorded run."""


class FormatError(ExportError):
    """An embedding file is malformed."""
