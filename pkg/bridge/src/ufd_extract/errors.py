"""Exception types for the extraction bridge."""


class ExtractError(Exception):
    """Base class for everything this package raises on purpose."""


class UnknownEncoder(ExtractError):
    """encoder_id is not in the supported table."""


class InvalidLayer(ExtractError):
    """layer_id is not valid for the chosen encoder."""


class WeightsUnavailable(ExtractError):
    """Pretrained weights could not be loaded (offline, missing file, bad checkpoint)."""


class DecodeFailure(ExtractError):
    """An image could not be decoded. Raised only when nothing survives;
    individual bad files are skipped with a warning and a manifest entry."""
