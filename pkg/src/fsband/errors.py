"""Exception types shared across the package.

File-not-found conditions use the builtin ``FileNotFoundError``; everything
else raises one of the classes below so callers can catch ``FsbandError``
as a single family.
"""


class FsbandError(Exception):
    """Base class for all fsband errors."""


class UnsupportedFormatError(FsbandError):
    """Raster file is not one of the supported formats."""

    def __init__(self, path, detail=""):
        self.path = str(path)
        msg = f"unsupported raster format: {self.path}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class CorruptDataError(FsbandError):
    """Raster file is recognized but cannot be decoded."""

    def __init__(self, path, detail=""):
        self.path = str(path)
        msg = f"corrupt raster data: {self.path}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class PatchTooLargeError(FsbandError):
    """Requested patch side is degenerate relative to the image size."""


class NonFiniteInputError(FsbandError):
    """Input array contains NaN or infinity."""


class ShapeMismatchError(FsbandError):
    """Array shapes disagree where they must match."""


class LengthMismatchError(FsbandError):
    """Parallel per-patch lists have inconsistent lengths."""


class EmptyInputError(FsbandError):
    """An operation received an empty collection."""


class EmptyMapError(FsbandError):
    """Banding map has no pixels."""


class SingleClassError(FsbandError):
    """Ranking metric requires both labels to be present."""


class DegenerateDatasetError(FsbandError):
    """Training set contains only one label."""


class UnknownKindError(FsbandError):
    """Unrecognized synthetic background kind."""


class ConfigError(FsbandError):
    """Malformed configuration (unknown keys, bad values)."""


class ModelFormatError(FsbandError):
    """Model weights file is not in the expected container format."""


class VersionMismatchError(ModelFormatError):
    """Model weights file declares an unsupported format version."""


class ChecksumMismatchError(ModelFormatError):
    """Model weights file failed its integrity check (truncated or edited)."""
