"""Exception types shared across the package."""


class SetLrcError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SetLrcError, ValueError):
    """An argument violates an operation's precondition."""


class ConstraintError(SetLrcError, ValueError):
    """A gallery violates the features >= images solvability rule."""


class ConditioningError(SetLrcError, ArithmeticError):
    """A regressor is too ill-conditioned for a least-squares solve."""


class ConfigurationError(SetLrcError, ValueError):
    """Inconsistent run configuration (mode, resolution, cached state)."""


class ManifestError(SetLrcError, ValueError):
    """A dataset manifest failed to load or validate."""


class ProtocolError(SetLrcError, ValueError):
    """A split protocol cannot be satisfied by the dataset."""
