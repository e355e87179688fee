"""Exception hierarchy shared by all switchpoint modules."""


class SwitchpointError(Exception):
    """Base class for all errors raised by this package."""


# --- input / decoding errors ------------------------------------------------

class UnsupportedCodec(SwitchpointError):
    """The file container or codec is not handled by any registered decoder."""


class CorruptStream(SwitchpointError):
    """The audio payload is truncated or malformed."""


class ParseError(SwitchpointError):
    """A text or JSON input file violates its documented format."""


class NonMonotonic(ParseError):
    """Beat times in an external grid file are not strictly increasing."""


class InvalidScript(SwitchpointError):
    """A synthesis script violates the track-script schema."""


class NoOverlap(SwitchpointError):
    """Candidate and annotation corpora share no track ids."""


# --- analysis errors ---------------------------------------------------------

class BufferTooShort(SwitchpointError):
    """The audio buffer is shorter than the analysis requires."""


class NoPulse(SwitchpointError):
    """No periodic pulse found; supply an external beat grid instead."""


class TooFewBeats(SwitchpointError):
    """The beat grid has too few beats to derive a strong-beat grid."""


class TrackTooShort(SwitchpointError):
    """Too few strong beats for novelty analysis at the configured kernel."""
