"""Exception hierarchy."""


class WassballError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(WassballError, ValueError):
    pass


class InvalidInputError(WassballError, ValueError):
    """Non-finite or otherwise malformed numeric input."""


class InvalidMassError(InvalidInputError):
    pass


class ShapeError(WassballError, ValueError):
    pass


class SizeError(WassballError, ValueError):
    """Problem too large for a dense (test-scale) routine."""


class DegenerateError(WassballError, ValueError):
    """The instance makes a bound or closed form undefined (zero cost, zero budget, ...)."""


class InfeasibleError(WassballError, ValueError):
    pass


class ImbalanceError(WassballError, ValueError):
    """Source and target masses differ."""


class TrainingError(WassballError, RuntimeError):
    pass


class NumericalError(WassballError, ArithmeticError):
    """NaN or overflow inside an attack loop."""


class SchemaError(WassballError, ValueError):
    pass
