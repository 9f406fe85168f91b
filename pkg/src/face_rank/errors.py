"""Exception types shared across the toolkit."""


class FaceRankError(Exception):
    """Base class for all toolkit errors."""


class DataError(FaceRankError):
    """Invalid numeric payload: non-finite values, bad labels, bad shapes."""


class MissingClassError(DataError):
    """A class index in [0, K) has no samples."""


class SymmetryError(FaceRankError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class DegenerateInputError(FaceRankError):
    """Input is structurally degenerate for the requested computation."""


class FeatFormatError(FaceRankError):
    """Malformed feature/prediction file.

    Carries the byte offset at which the problem was detected when that
    is meaningful (binary payloads); None for whole-file problems.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ManifestError(FaceRankError):
    """Invalid zoo manifest: schema violation, duplicate ids, missing files."""


class EvaluationError(FaceRankError):
    """Correlation evaluation cannot proceed (too few models, constant data)."""
