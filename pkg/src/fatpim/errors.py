"""Exception types shared across the simulator."""


class FatPimError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(FatPimError, ValueError):
    """A configuration is structurally invalid (shapes, unknown keys, widths)."""


class DomainError(FatPimError, ValueError):
    """An argument is outside the domain an operation accepts."""


class EnumerationTooLarge(FatPimError):
    """An exhaustive enumeration would exceed the configured budget."""

    def __init__(self, size, budget):
        self.size = size
        self.budget = budget
        super().__init__(f"enumeration needs {size} cases, budget is {budget}")
