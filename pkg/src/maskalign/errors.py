"""Exception hierarchy.

Everything raised on purpose by this package derives from MaskAlignError.
NumericalError marks non-finite arithmetic and maps to its own CLI exit
code; every other subclass is a validation failure.
"""


class MaskAlignError(Exception):
    """Base class for all errors raised by maskalign."""


class InvalidParameter(MaskAlignError):
    """A scalar or config field is outside its documented range."""


class DegenerateWidth(MaskAlignError):
    """A mask width underflowed to zero scale."""


class EmptyEvents(MaskAlignError):
    """An operation needing at least one event got none."""


class ShapeError(MaskAlignError):
    """Array shapes disagree with the documented contract."""


class EmptyBatch(MaskAlignError):
    """A batch-level operation received zero videos."""


class EmptyDataset(MaskAlignError):
    """Training or evaluation was asked to run on no videos."""


class EmptyGroundTruth(MaskAlignError):
    """Evaluation needs ground-truth segments that are missing."""


class EmptyResult(MaskAlignError):
    """A statistic has no eligible inputs."""


class LayoutError(MaskAlignError):
    """The simulator could not realize a valid event layout."""


class NumericalError(MaskAlignError):
    """Non-finite values appeared where finite ones are required."""


class FormatError(MaskAlignError):
    """A binary embedding file violates the documented layout."""


class SchemaError(MaskAlignError):
    """A manifest or config file violates the documented schema."""


class IoError(MaskAlignError):
    """An underlying file operation failed."""
