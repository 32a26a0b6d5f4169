"""Exception types raised by predclass."""


class PredclassError(Exception):
    """Base class for all predclass errors."""


class InputError(PredclassError, ValueError):
    """A history or parameter is outside the allowed range."""


class UndefinedConditionalError(PredclassError, ValueError):
    """Conditioning on a history that has probability zero."""


class UndefinedPosteriorError(UndefinedConditionalError):
    """Every mixture component assigns probability zero to the history."""


class EnumerationCapError(PredclassError, ValueError):
    """Exact enumeration would exceed the configured path cap."""


class SpecError(PredclassError, ValueError):
    """A measure, predictor or experiment spec failed validation."""


class InvariantError(PredclassError, RuntimeError):
    """A bound that must hold mathematically was violated numerically."""


class MissingQuantityError(PredclassError, KeyError):
    """A declared bound references a quantity absent from the report."""
