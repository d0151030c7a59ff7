"""
Error types for the SGM-Net toolkit
Every failure raised by library code derives from MattingError
"""

from typing import Any, Dict, Optional


class MattingError(Exception):
    """Base class for structured toolkit errors"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def __str__(self) -> str:
        if not self.details:
            return self.message
        extra = ", ".join(f"{key}={value}" for key, value in self.details.items())
        return f"{self.message} ({extra})"


class ShapeMismatchError(MattingError):
    """Raised when operand shapes cannot be combined"""

    def __init__(self, op: str, message: str, **shapes: Any):
        details = {"op": op}
        details.update({name: tuple(shape) if isinstance(shape, (list, tuple)) else shape
                        for name, shape in shapes.items()})
        super().__init__(f"{op}: {message}", details)
        self.op = op


class ConfigError(MattingError):
    """Invalid or inconsistent configuration"""


class DataError(MattingError):
    """Invalid sample, dataset layout or value range"""


class ImageFormatError(DataError):
    """Unsupported or corrupt image file"""


class CheckpointError(MattingError):
    """Unreadable checkpoint or checkpoint/config mismatch"""


class GradientError(MattingError):
    """Invalid backward request"""


class MissingGradientError(GradientError):
    """A parameter has no gradient in an optimizer step"""

    def __init__(self, name: str):
        super().__init__(f"no gradient for parameter '{name}'", {"parameter": name})
        self.name = name
