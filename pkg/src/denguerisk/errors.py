"""Exception types shared across the package."""


class ClimateFormatError(ValueError):
    """Malformed climate or grid file."""


class RateTableError(ValueError):
    """Malformed or unknown rate table."""


class ModelInvalidError(ValueError):
    """Parameters that violate a model's validity constraints."""


class ParameterInfeasibleError(ValueError):
    """Parameters for which a closed-form quantity is undefined."""


class IntegrationError(RuntimeError):
    """The ODE integrator could not take an acceptable step."""


class DegenerateFilterError(RuntimeError):
    """Every particle received zero weight."""
