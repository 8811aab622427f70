"""Exception hierarchy for the sketchprune toolkit.

Errors are grouped so the CLI can map them onto stable exit codes:
validation problems (bad inputs, malformed archives) vs numerical
failures vs certificate violations.
"""


class SketchPruneError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SketchPruneError):
    """Input violates a documented precondition or schema invariant."""


class MissingFileError(ValidationError):
    """A manifest-declared file is absent on disk."""


class MalformedNpyError(ValidationError):
    """An .npy file does not follow the v1.0 byte layout."""


class ShapeMismatchError(ValidationError):
    """A tensor's shape disagrees with its manifest declaration."""


class NonFiniteError(ValidationError):
    """A tensor contains NaN or infinite values."""


class TopologyError(ValidationError):
    """The manifest graph breaks a DAG or channel-consistency invariant."""


class NumericalError(SketchPruneError):
    """A numerical routine (SVD, eigensolver) failed to converge."""


class DegenerateSketchError(NumericalError):
    """The sketch collapsed to an all-zero matrix; normalization impossible."""


class CertificateError(SketchPruneError):
    """A sketch violated the spectral error-bound certificate."""
