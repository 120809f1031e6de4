"""Exception taxonomy shared across the package."""


class LesionTrackError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedFormatError(LesionTrackError):
    """File is not in the supported NIfTI-1 subset (datatype, dimensionality, orientation)."""


class CorruptFileError(LesionTrackError):
    """File is truncated or structurally inconsistent."""


class LabelRangeError(LesionTrackError):
    """Instance label volume has more components than the on-disk dtype can hold."""


class InvalidMaskError(LesionTrackError):
    """Operation requires a binary mask but got something else."""


class ComponentNotFoundError(LesionTrackError):
    """Requested component label does not exist."""


class ShapeMismatchError(LesionTrackError):
    """Two volumes that must share a grid do not."""


class MissingPredictionError(LesionTrackError):
    """Prediction store has no mask for the requested case/timepoint."""


class DegenerateDirectionError(LesionTrackError):
    """Displacement direction is undefined (centroid coincides with the volume center)."""


class PlacementError(LesionTrackError):
    """Could not place a lesion without violating separation constraints."""


class UndefinedDiceError(LesionTrackError):
    """Dice is undefined because both masks are empty."""


class DegenerateTestError(LesionTrackError):
    """Signed-rank test is undefined because every paired difference is zero."""


class InvalidInputError(LesionTrackError):
    """Inconsistent inputs to a classification step."""


class CaseError(LesionTrackError):
    """A single case failed during an experiment run; the run may continue."""


class TopKUnsatisfiableError(LesionTrackError):
    """Fewer usable lesions than the requested top-k selection size."""

    def __init__(self, requested: int, achievable: int):
        super().__init__(f"requested top {requested} lesions but only {achievable} are usable")
        self.requested = requested
        self.achievable = achievable


class ConfigError(LesionTrackError):
    """Run configuration is malformed."""


class IoError(LesionTrackError):
    """Reading or writing a result artifact failed."""
