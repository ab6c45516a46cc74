"""Error taxonomy shared across the package.

Each class maps to one process exit code so the command line tool can
translate failures uniformly (see cli.main).
"""


class DlmBoldError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(DlmBoldError):
    """Invalid parameter value or inconsistent run configuration."""

    exit_code = 2


class FormatError(DlmBoldError):
    """Malformed input file (volume, design matrix, mask, manifest)."""

    exit_code = 3


class NumericError(DlmBoldError):
    """Numerical failure (singular matrix, non-positive-definite scale)."""

    exit_code = 4


class VolumeIOError(DlmBoldError):
    """Filesystem-level failure while reading or writing data files."""

    exit_code = 5


# -- volume format errors, one kind per offending header condition ----------


class BadMagicError(FormatError):
    """Header magic is neither the single-file nor the pair signature."""


class UnsupportedDatatypeError(FormatError):
    """Header datatype code is outside the supported set."""


class BadDimCountError(FormatError):
    """Header dim[0] does not describe a 3-D or 4-D image."""


class TruncatedPayloadError(FormatError):
    """File ends before the header-declared voxel payload is complete."""


class DesignFormatError(FormatError):
    """Design matrix file is ragged or contains non-numeric fields."""
