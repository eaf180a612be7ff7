"""Exception hierarchy shared across the package."""


class LandmarkError(Exception):
    """Base class for all errors raised by this package."""


class InputError(LandmarkError, ValueError):
    """Inputs have the wrong shape, count or contain non-finite values."""


class CalibrationError(LandmarkError, ValueError):
    """A camera view violates the pinhole-model invariants."""

    def __init__(self, message, view_id=None):
        if view_id is not None:
            message = f"view {view_id!r}: {message}"
        super().__init__(message)
        self.view_id = view_id


class ParseError(LandmarkError, ValueError):
    """A file could not be decoded into the expected structure."""

    def __init__(self, message, offset=None, field=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset
        self.field = field


class BehindCameraError(LandmarkError, ValueError):
    """Point has non-positive depth in the camera frame."""


class InsufficientViewsError(LandmarkError):
    """Fewer than two rays survive the confidence threshold."""


class DegenerateGeometryError(LandmarkError):
    """Rays are (nearly) parallel so the intersection is not determined."""


class InvalidSpecError(LandmarkError, ValueError):
    """Filter or encoding configuration outside its valid range."""


class GapError(LandmarkError, ValueError):
    """A trajectory still contains invalid frames where none are allowed."""


class EmptyTrajectoryError(LandmarkError, ValueError):
    """A trajectory has no valid frame to work from."""


class EmptyResultError(LandmarkError):
    """A pipeline run produced no valid landmark at all."""


class PipelineIOError(LandmarkError, OSError):
    """An input file referenced by a run could not be read."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
