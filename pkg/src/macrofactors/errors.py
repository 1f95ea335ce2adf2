"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""

from __future__ import annotations


class MacroFactorError(Exception):
    exit_code = 1


class InputError(MacroFactorError, ValueError):
    """Bad user input: shapes, domains, alignment, configuration."""

    exit_code = 2


class NumericalError(MacroFactorError, ArithmeticError):
    """A computation could not be carried out reliably."""

    exit_code = 3


class DomainError(InputError):
    pass


class SizeError(InputError):
    pass


class AlignmentError(InputError):
    pass


class AssemblyError(InputError):
    pass


class ParameterError(InputError):
    pass


class ConsistencyError(InputError):
    pass


class ValidationError(InputError):
    """Aggregates every problem found in a config file."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


class DegenerateInputError(NumericalError):
    pass


class FilterError(NumericalError):
    pass


class EstimationError(NumericalError):
    pass


class StabilityError(NumericalError):
    pass


class SingularDesignError(NumericalError):
    pass
