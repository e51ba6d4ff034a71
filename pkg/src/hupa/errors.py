"""Exception hierarchy.

Every error raised on a domain or I/O failure derives from HupaError so the
CLI can map them to exit code 1 uniformly.  Programming errors (wrong types,
violated call contracts) raise ValueError/TypeError as usual.
"""


class HupaError(Exception):
    """Base class for all domain and format errors."""


class PatternFormatError(HupaError):
    """Malformed line-oriented text file (pattern or tessellation).
    Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FieldFormatError(HupaError):
    """Malformed PBM/PGM payload. Carries the byte offset when known."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"byte {offset}: {message}"
        super().__init__(message)


class IncommensurateBoxError(HupaError):
    """Box length is not an integer multiple of the lattice cell."""

    def __init__(self, axis, length, nearest_length, nearest_spacing):
        self.axis = axis
        self.length = length
        self.nearest_length = nearest_length
        self.nearest_spacing = nearest_spacing
        super().__init__(
            f"axis {axis}: box length {length:g} is not commensurate with the "
            f"lattice cell; nearest commensurate length is {nearest_length:g}, "
            f"nearest valid spacing is {nearest_spacing:.12g}"
        )


class TargetUnreachableError(HupaError):
    """Packing target not reached before the rejection budget ran out."""

    def __init__(self, placed, target, max_attempts):
        self.placed = placed
        self.target = target
        self.max_attempts = max_attempts
        super().__init__(
            f"placed {placed} of {target} centers before hitting "
            f"{max_attempts} consecutive rejections"
        )


class WindowTooLargeError(HupaError):
    """Window radius at or beyond the periodic self-overlap limit."""

    def __init__(self, radius, limit):
        self.radius = radius
        self.limit = limit
        super().__init__(
            f"window radius {radius:g} exceeds the limit {limit:g} "
            f"(must satisfy 0 < R < min(box lengths)/2)"
        )


class DegenerateInputError(HupaError):
    """Input that is structurally valid but carries no usable signal."""


class CannotFitError(HupaError):
    """Scaling fit impossible on the requested range."""


class TessellationError(HupaError):
    """Tessellation precondition or construction failure."""
