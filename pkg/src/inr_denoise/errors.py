"""Exception hierarchy shared by every module."""


class InrDenoiseError(Exception):
    """Base class for all library errors."""


class ImageIOError(InrDenoiseError, OSError):
    """Missing, unreadable, or unwritable image file."""


class FormatError(InrDenoiseError, ValueError):
    """PNG with an unsupported color type, bit depth, or an alpha channel."""


class ShapeMismatch(InrDenoiseError, ValueError):
    """Two arrays or images whose dimensions are required to agree do not."""


class NonFiniteOutput(InrDenoiseError, ArithmeticError):
    """NaN or Inf appeared in network outputs, losses, gradients, or parameters."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ImageTooSmall(InrDenoiseError, ValueError):
    """Image smaller than the estimator's patch size."""
