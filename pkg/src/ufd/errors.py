"""Exception hierarchy shared across the toolkit.

Everything raised on bad data or bad files derives from UfdError so callers
(and the CLI) can distinguish data problems from genuine bugs.
"""


class UfdError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(UfdError):
    """A vector's length disagrees with the declared feature dimension."""


class ZeroNormVector(UfdError):
    """A vector has (near-)zero L2 norm and cannot live on the cosine sphere."""


class NonFiniteValue(UfdError):
    """NaN or infinity where a finite float is required."""


class EmptyInput(UfdError):
    """An operation that needs at least one record received none."""


class FormatVersionUnsupported(UfdError):
    """Bank file magic or version not recognised by this reader."""


class ChecksumMismatch(UfdError):
    """Stored integrity check does not match the recomputed one."""


class TruncatedFile(UfdError):
    """File ends before the declared contents do."""


class EncoderMismatch(UfdError):
    """Banks from different encoders or layers cannot be combined."""


class InsufficientEntries(UfdError):
    """Not enough entries (or classes) to satisfy a subsampling request."""


class MissingClassIds(UfdError):
    """Class-based subsampling needs class_id >= 0 on every entry."""


class KTooLarge(UfdError):
    """k exceeds the number of entries on one side of the bank."""


class EmptyLabelSide(UfdError):
    """The bank has no entries with the required label."""


class SingleClassBank(UfdError):
    """Training needs both real and fake entries."""


class NonFiniteLoss(UfdError):
    """Training loss diverged to NaN or infinity."""


class SingleClassInput(UfdError):
    """Metric needs both classes present among the truths."""


class EncoderFailure(UfdError):
    """Image codec failed to encode or decode."""


class KernelTooLarge(UfdError):
    """Filter kernel does not fit inside the image."""


class EmptyCorpus(UfdError):
    """Spectrum averaging over zero images."""


class ManifestUnresolvable(UfdError):
    """Test-suite manifest points at files that do not exist."""


class CalibrationSourceMissing(UfdError):
    """Validation calibration requested without validation scores."""


class IoFailure(UfdError):
    """Could not read or write an artifact file."""


class DecodeFailure(UfdError):
    """Image file could not be decoded."""


class WeightsUnavailable(UfdError):
    """Pretrained encoder weights cannot be loaded in this environment."""
