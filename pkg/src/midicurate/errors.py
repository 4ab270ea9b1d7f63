"""Exception types shared across the toolkit."""


class MidiCurateError(Exception):
    """Base class for all toolkit errors."""


class MidiParseError(MidiCurateError):
    """Malformed Standard MIDI File data.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class EmptySequenceError(MidiCurateError):
    """An operation received a note sequence with no notes."""


class UndefinedRatioError(MidiCurateError):
    """A ratio was requested with a zero denominator."""


class AlignmentValidationError(MidiCurateError):
    """An alignment violates the link invariants (bad sentinels,
    out-of-range or repeated indices)."""

    def __init__(self, message, bad_links=None):
        super().__init__(message)
        self.bad_links = bad_links or []


class UnsupportedVersionError(MidiCurateError):
    """An alignment container file declares an unknown format version."""


class InterpolationError(MidiCurateError):
    """Note interpolation is impossible (fewer than two matched anchors)."""


class SynchronizationError(MidiCurateError):
    """Beat synchronization failed, e.g. on a non-monotone beat-to-time map."""
