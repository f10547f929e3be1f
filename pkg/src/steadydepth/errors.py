"""Exception hierarchy shared by all steadydepth modules."""


class SteadyDepthError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateProjection(SteadyDepthError):
    """A point projected with |z| below the degeneracy guard (1e-12)."""


class NonPositiveDepth(SteadyDepthError):
    """A depth value that must be positive was zero or negative."""


class UndefinedDepth(SteadyDepthError):
    """Depth requested at a pixel carrying the 0 (undefined) sentinel."""


class NoOverlap(SteadyDepthError):
    """No pixel is defined in both rasters of a scale-ratio pair."""


class EmptyInput(SteadyDepthError):
    """An aggregate was requested over an empty collection."""


class NonPositiveScale(SteadyDepthError):
    """A scale factor that must be positive was zero or negative."""


class TooFewFrames(SteadyDepthError):
    """Pair sampling needs at least two frames."""


class OutOfBounds(SteadyDepthError):
    """A coordinate fell outside the raster's sampling domain."""


class SizeMismatch(SteadyDepthError):
    """Two rasters that must share dimensions do not."""


class EmptyMask(SteadyDepthError):
    """No pixel survived validity filtering for a frame pair."""


class ShapeMismatch(SteadyDepthError):
    """Parameter and gradient shapes disagree."""


class AllUndefined(SteadyDepthError):
    """A depth map has no defined pixel to initialize from."""


class NoAcceptedPairs(SteadyDepthError):
    """Every sampled frame pair was rejected before optimization."""


class NonFiniteLoss(SteadyDepthError):
    """A pair produced a NaN or infinite loss during optimization."""

    def __init__(self, pair, message=None):
        self.pair = pair
        super().__init__(message or f"non-finite loss on pair {pair}")


class DegenerateInput(SteadyDepthError):
    """Too few or zero-variance samples for a regression."""


class TrackDegenerate(SteadyDepthError):
    """A track retained fewer than two usable observations."""


class NoValidPixels(SteadyDepthError):
    """A metric found no pixel where both rasters are defined."""


class EmptyScene(SteadyDepthError):
    """A scene specification contains no primitives."""


class MalformedHeader(SteadyDepthError):
    """A file header does not match the expected format."""


class TruncatedData(SteadyDepthError):
    """A file ended before the payload announced by its header."""


class UnsupportedFormat(SteadyDepthError):
    """A recognized but unsupported format variant (e.g. color PFM for depth)."""


class UnsupportedEndianness(SteadyDepthError):
    """A PFM scale field announcing big-endian data, which this reader rejects."""


class BadMagic(SteadyDepthError):
    """A binary file's magic tag does not match."""


class SchemaViolation(SteadyDepthError):
    """A structured file violates its schema; message carries the field path."""
