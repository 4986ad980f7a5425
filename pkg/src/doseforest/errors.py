"""Exception hierarchy for the doseforest package.

Every error raised by the library derives from DoseForestError so callers
(and the CLI) can map failures to exit codes without string matching.
"""


class DoseForestError(Exception):
    """Base class for all doseforest errors."""


class ConfigError(DoseForestError):
    """Invalid configuration value (bad fraction, grid size, unknown key, ...)."""


class SchemaError(DoseForestError):
    """CSV header does not provide the required columns."""


class CsvParseError(DoseForestError):
    """A cell could not be parsed as a finite number; names row and column."""


class EmptyDatasetError(DoseForestError):
    """Input contains no data rows."""


class DegenerateBandwidthError(DoseForestError):
    """Bandwidth selection received a constant sample."""


class UnsupportedKernelError(DoseForestError):
    """Operation not defined for the requested kernel family."""


class TrainingError(DoseForestError):
    """Model fitting preconditions violated (too few rows, ...)."""


class DegenerateGpsError(DoseForestError):
    """Treatment is (near-)deterministic given covariates; positivity fails."""


class NoSupportError(DoseForestError):
    """No kernel mass at the requested evaluation point."""


class DoseRangeError(DoseForestError):
    """Requested dose lies outside the supported treatment range."""


class GridMismatchError(DoseForestError):
    """Two curves do not share the same treatment grid."""


class DimensionMismatchError(DoseForestError):
    """Covariate vector length does not match the model."""


class ModelFormatError(DoseForestError):
    """Model file is malformed or incomplete."""


class ModelVersionError(DoseForestError):
    """Model file declares an unsupported format version."""
