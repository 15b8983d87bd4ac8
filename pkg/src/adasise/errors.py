"""Exception types shared across the package."""


class AdasiseError(Exception):
    """Base class for errors raised by this package."""


class ShapeMismatchError(AdasiseError, ValueError):
    """Operands have incompatible shapes."""


class ModelError(AdasiseError):
    """Problem with a model definition or its use."""


class ModelFormatError(ModelError):
    """Manifest or weight container is malformed or inconsistent."""


class InvalidClassError(ModelError, ValueError):
    """Class index outside the model's output range."""


class AnnotationError(AdasiseError):
    """Ground-truth annotation data is malformed or out of bounds."""


class BenchmarkError(AdasiseError):
    """A benchmark input could not be processed."""


class UndefinedDropError(AdasiseError):
    """Drop rate undefined because the unmasked confidence is zero."""


class UsageError(AdasiseError):
    """Invalid command line; rejected before any work starts."""
