"""Exception types raised across the package."""


class PitchTrackError(Exception):
    """Base class for all data-level failures raised by pitchtrack."""


class DegenerateBox(PitchTrackError, ValueError):
    """A box has zero or negative area, or non-finite coordinates."""


class EmptyMask(PitchTrackError):
    """No field pixels were found where at least one was required."""


class DimensionMismatch(PitchTrackError, ValueError):
    """Embedding vectors of incompatible length were combined."""


class MissingKey(PitchTrackError, KeyError):
    """An embedding store has no entry for the requested detection."""


class MissingEmbedding(PitchTrackError):
    """Re-identification needed an embedding that was never supplied."""


class OutOfOrderFrame(PitchTrackError):
    """Frames were fed to the tracker in non-increasing order."""


class InsufficientTracks(PitchTrackError):
    """Too few eligible tracks to draw a re-ID batch."""


class InfeasibleSpec(PitchTrackError, ValueError):
    """A synthetic scenario cannot be generated with the requested layout."""


class FormatError(PitchTrackError, ValueError):
    """A data file row could not be parsed."""
