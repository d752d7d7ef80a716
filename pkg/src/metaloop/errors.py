"""Exception hierarchy shared by every subsystem."""


class MetaloopError(Exception):
    """Base class for all package errors."""


class SchemaError(MetaloopError, ValueError):
    """Malformed input document (CSV, JSON, run config)."""


class PhysicsError(MetaloopError, ValueError):
    """Physically invalid optical constants."""


class RangeError(MetaloopError, ValueError):
    """Wavelength or band outside the tabulated range."""


class EncodingError(MetaloopError, ValueError):
    """Bit vector does not match the binary encoding."""


class SingularInterfaceError(MetaloopError, ArithmeticError):
    """Interface transmission amplitude vanished."""


class SingularSystemError(MetaloopError, ArithmeticError):
    """System matrix cannot be inverted for r/t."""


class DimensionError(MetaloopError, ValueError):
    """Vector or dataset shape mismatch."""


class DivergenceError(MetaloopError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")
        self.epoch = epoch
        self.loss = loss


class CapacityError(MetaloopError, ValueError):
    """Problem too large for an exact or statevector method."""


class ConfigError(MetaloopError, ValueError):
    """Invalid solver or run configuration."""


class ExhaustedError(MetaloopError, RuntimeError):
    """Every bit vector of the search space is already in the dataset."""
