"""Exception hierarchy shared by every corrsim module."""


class CorrsimError(Exception):
    """Base class for all library errors."""


class SourceError(CorrsimError, ValueError):
    """Malformed source definition (bad shape, negative mass, bad normalisation)."""


class CapacityError(CorrsimError):
    """A dense object or an enumeration would exceed its configured budget."""

    def __init__(self, what: str, size: float, budget: float):
        self.what = what
        self.size = size
        self.budget = budget
        super().__init__(f"{what}: size {size:.6g} exceeds budget {budget:.6g}")


class NumericalError(CorrsimError, ArithmeticError):
    """An iterative numeric routine failed to converge."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class DegenerateSourceError(CorrsimError, ValueError):
    """The operation needs a non-degenerate (or non-product) source."""


class InfeasibleError(CorrsimError):
    """No protocol in the searched class meets the requested success floor.

    ``best`` carries the closest candidate found, when there is one.
    """

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class PromiseError(CorrsimError, ValueError):
    """Input pair lies outside the promise of a partial function."""


class InvariantViolation(CorrsimError, AssertionError):
    """A runtime contract was broken (e.g. a player output exceeded its size cap)."""


class ConfigError(CorrsimError, ValueError):
    """Experiment configuration failed schema validation.

    ``problems`` lists one ``(field, message)`` pair per offending entry.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"{field}: {msg}" for field, msg in self.problems)
        super().__init__(f"invalid config: {lines}")
