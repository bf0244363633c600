"""Exception types raised across the package."""


class ContractError(ValueError):
    """Arguments violate a precondition (shape, sign, admissible range)."""


class DomainError(ValueError):
    """A parameter vector lies outside the admissible set of the model."""


class RankDeficientError(ContractError):
    """A matrix that must have full rank does not."""


class NumericalBlowup(ArithmeticError):
    """A simulation step produced non-finite values.

    Attributes
    ----------
    step : int
        Index k of the step whose output was not finite.
    """

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class ConfigError(ValueError):
    """The scenario configuration is malformed or violates a design constraint."""
