"""Exception hierarchy shared by all modules."""


class VirtualDepthError(Exception):
    """Base class for every error raised by this package."""


class CalibrationError(VirtualDepthError, ValueError):
    pass


class MissingKey(CalibrationError):
    pass


class MalformedNumber(CalibrationError):
    pass


class NonRectifiedMatrix(CalibrationError):
    pass


class NonPositiveDepth(VirtualDepthError, ValueError):
    pass


class BehindCamera(VirtualDepthError, ValueError):
    pass


class TooClose(VirtualDepthError, ValueError):
    """A shifted box crosses the near plane and must be dropped."""


class UnsupportedBitDepth(VirtualDepthError, ValueError):
    pass


class CorruptFile(VirtualDepthError, IOError):
    pass


class ValueOutOfRange(VirtualDepthError, ValueError):
    pass


class MalformedLine(VirtualDepthError, ValueError):
    def __init__(self, line_index: int, message: str):
        super().__init__(f"line {line_index}: {message}")
        self.line_index = line_index


class SizeMismatch(VirtualDepthError, ValueError):
    pass


class AllPixelsInvalid(VirtualDepthError, ValueError):
    pass


class NonFinite(VirtualDepthError, ValueError):
    pass


class DegenerateBox(VirtualDepthError, ValueError):
    pass


class MalformedInput(VirtualDepthError, ValueError):
    pass


class InpainterFailed(VirtualDepthError, RuntimeError):
    pass
