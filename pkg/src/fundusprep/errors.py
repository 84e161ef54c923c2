"""Exception types shared across the toolkit."""


class FundusPrepError(Exception):
    """Base class for all toolkit errors."""


class FileNotFound(FundusPrepError, FileNotFoundError):
    """Input file does not exist."""


class UnsupportedFormat(FundusPrepError):
    """File is not a format the toolkit reads (PNG/JPEG, 8-bit)."""


class CorruptImage(FundusPrepError):
    """File exists but cannot be decoded."""


class WrongChannelCount(FundusPrepError):
    """Operation received an image with the wrong number of channels."""


class IndexOutOfRange(FundusPrepError):
    """Channel index beyond the image's channel count."""


class DimensionMismatch(FundusPrepError):
    """Planes or images that must share dimensions do not."""


class UnsupportedConversion(FundusPrepError):
    """No conversion implemented between the requested color spaces."""


class ZeroDimension(FundusPrepError):
    """Requested output size has a zero or negative dimension."""


class EmptyROI(FundusPrepError):
    """No pixel rises above the near-black border threshold."""


class TileTooSmall(FundusPrepError):
    """CLAHE tile grid produces tiles below the 8x8 pixel minimum."""


class BadPatchSize(FundusPrepError):
    """Dark-channel patch must be an odd positive integer."""


class DegenerateImage(FundusPrepError):
    """Image content leaves an estimate undefined (e.g. an all-zero channel)."""


class LengthMismatch(FundusPrepError):
    """Paired sequences have different lengths."""


class EmptyInput(FundusPrepError):
    """A non-empty collection was required."""


class ClassOutOfRange(FundusPrepError):
    """Class id at or beyond the declared class count."""


class ManifestInvalid(FundusPrepError):
    """Dataset manifest fails validation; fatal for a batch run."""


class PairingViolation(FundusPrepError):
    """Train and validation datasets were not produced by the same method."""


class EmptyClass(FundusPrepError):
    """A class directory contains no images."""


class UnknownBackbone(FundusPrepError):
    """Requested backbone is not one of the supported architectures."""
