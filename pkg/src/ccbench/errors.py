"""Exception hierarchy shared by all ccbench modules."""


class CCBenchError(Exception):
    """Base class for every error raised by ccbench."""


class ImageFormatError(CCBenchError, ValueError):
    """Malformed or unsupported image file."""


class UnsupportedMaxvalError(ImageFormatError):
    pass


class TruncatedDataError(ImageFormatError):
    pass


class MissingSidecarError(CCBenchError, FileNotFoundError):
    pass


class PreprocessingError(CCBenchError, ValueError):
    """Input has not gone through a required preprocessing step.

    Raised when estimation or ground-truth extraction is attempted on an
    image that still carries its black level.
    """


class DataError(CCBenchError, ValueError):
    """Input data violates an operation's contract."""


class MixedGroundTruthError(CCBenchError, ValueError):
    pass
