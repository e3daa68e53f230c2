"""Exception types shared across the package."""


class SegsynthError(Exception):
    """Base class for all package errors."""


class MaskFormatError(SegsynthError):
    """Unreadable or unsupported mask file."""


class EmptyMaskError(SegsynthError):
    """Mask has no foreground pixels."""


class DegenerateContourError(SegsynthError):
    """Foreground too small or too thin to carry a contour."""


class ContourError(SegsynthError):
    """Invalid contour geometry."""


class RasterError(SegsynthError):
    """Contour could not be rasterized into the requested frame."""


class SynthesisError(SegsynthError):
    """A synthesis stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


class MetricError(SegsynthError):
    """Metric evaluation could not proceed (e.g. shape mismatch)."""
