"""Exception hierarchy shared by all prosemph modules."""


class ProsemphError(Exception):
    """Base class for all toolkit errors."""


class MalformedFileError(ProsemphError):
    """A file does not follow its documented schema or container format."""


class InconsistentAlignmentError(ProsemphError):
    """An utterance violates a structural invariant (spans, counts, times)."""


class CyclicDependencyError(ProsemphError):
    """The dependency head graph contains a cycle."""


class WordCountMismatchError(ProsemphError):
    """Annotation word count disagrees with the referenced utterance."""


class UnsupportedEncodingError(ProsemphError):
    """WAV encoding other than PCM16 / IEEE float32."""


class TooShortError(ProsemphError):
    """Waveform shorter than a single analysis frame."""


class AllUnvoicedError(ProsemphError):
    """F0 track contains no voiced frame to interpolate from."""


class EmptyAlignmentError(ProsemphError):
    """Utterance character alignment covers no positive time span."""


class FrameRateMismatchError(ProsemphError):
    """Tracks being combined have different frame rates."""


class BandOutOfRangeError(ProsemphError):
    """Requested scale band indices fall outside the scalogram."""


class LengthMismatchError(ProsemphError):
    """Sequence length disagrees with the utterance structure."""


class DimMismatchError(ProsemphError):
    """Embedding or projection dimensions are inconsistent."""


class UnknownUtteranceError(ProsemphError):
    """Semantic provider has no vectors for the requested utterance."""


class IdOutOfRangeError(ProsemphError):
    """Embedding lookup id exceeds the table's vocabulary."""


class EmptyDatasetError(ProsemphError):
    """Training requested on an empty dataset."""


class UtteranceSetMismatchError(ProsemphError):
    """Predicted and gold label sets cover different utterances."""
