"""Exception hierarchy shared by every module."""


class LatentAtlasError(Exception):
    """Base class for all library errors."""


class DimensionError(LatentAtlasError, ValueError):
    pass


class SingularSystemError(LatentAtlasError, ValueError):
    pass


class TrainingDivergedError(LatentAtlasError, FloatingPointError):
    """A loss or gradient became non-finite during optimization."""


class ModeCollapseError(TrainingDivergedError):
    pass


class MissingRecoderError(LatentAtlasError, RuntimeError):
    pass


class FormatError(LatentAtlasError, ValueError):
    """Base class for on-disk format problems; ``code`` is stable."""

    code = "format"


class BadMagicError(FormatError):
    code = "bad-magic"


class TruncatedFileError(FormatError):
    code = "truncated"


class DtypeMismatchError(FormatError):
    code = "dtype-mismatch"


class VersionMismatchError(FormatError):
    code = "version-mismatch"


class ShapeMismatchError(FormatError):
    code = "shape-mismatch"


class TrailingDataError(FormatError):
    code = "trailing-data"


class ImageRangeError(LatentAtlasError, ValueError):
    """Pixel values outside [0, 1] (or NaN) cannot be quantized to 8 bits."""


class ConfigError(LatentAtlasError, ValueError):
    pass
