"""Exception types shared across the toolkit."""


class ShapeError(ValueError):
    """Operands have incompatible or unexpected dimensions."""


class NumericError(ValueError):
    """A computation produced or received non-finite values."""


class FormatError(ValueError):
    """A file does not conform to its binary format."""
