"""Exception hierarchy shared by all toolkit modules."""


class PeaKitError(Exception):
    """Base class for all toolkit errors."""


# --- video I/O ---

class FileMissing(PeaKitError):
    pass


class SizeMismatch(PeaKitError):
    """File size is not a multiple of the frame byte size (wrong resolution?)."""


class UnsupportedFormat(PeaKitError):
    """Input is not 8-bit planar 4:2:0."""


class IndexOutOfRange(PeaKitError):
    pass


class OutOfBounds(PeaKitError):
    pass


class OddGeometry(PeaKitError):
    """Crop coordinates must be even so chroma sub-planes stay aligned."""


# --- annotation ---

class DimensionMismatch(PeaKitError):
    pass


class ParseError(PeaKitError):
    """Annotation file parse failure with line/field diagnostics."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


# --- patch pipeline ---

class WrongSpanLength(PeaKitError):
    """Temporal labeling requires exactly 10 masks."""


class InsufficientReferenceArea(PeaKitError):
    """Reference frame too small to place any window."""


# --- dataset store ---

class CorruptRecord(PeaKitError):
    pass


class PayloadLengthMismatch(PeaKitError):
    pass


# --- nn engine ---

class ShapeMismatch(PeaKitError):
    pass


class OddSpatialDims(PeaKitError):
    """2x2 pooling requires even spatial dimensions."""


class DegenerateBatch(PeaKitError):
    """Batch statistics are not well defined (fewer than 2 values per channel)."""


class UndefinedDenominator(PeaKitError):
    """A term of the accuracy formula has a zero denominator."""


# --- model building / training ---

class ShapeUnderflow(PeaKitError):
    """Input too small for the configured layer stack."""


class ConfigInvalid(PeaKitError):
    pass


class EmptyClass(PeaKitError):
    """A split contains no samples of one label."""


class DivergedLoss(PeaKitError):
    """Training aborted on a non-finite loss."""


class GeometryMismatch(PeaKitError):
    """Patch geometry does not match the classifier input."""


# --- analysis ---

class MissingClassifier(PeaKitError):
    pass


class SequenceTooShort(PeaKitError):
    """Fewer than 10 frames: temporal flags cannot be computed."""
