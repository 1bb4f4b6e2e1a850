"""Exception hierarchy shared by the solver modules, the CLI and the routers.

Each error keeps the builtin base a caller would naturally catch
(ValueError for bad inputs, ArithmeticError for numerical breakdown), so
plain ``except ValueError`` keeps working around library calls.
"""


class SolverError(Exception):
    """Base class for every error raised by the solver."""


class InvalidParameterError(SolverError, ValueError):
    """A parameter violates the owning type's invariants."""


class InvalidMomentsError(InvalidParameterError):
    """Maxwellian requested with rho <= 0 or T <= 0."""


class RankExceedsTableError(InvalidParameterError):
    """Separated rank larger than the kernel-mode table allows."""


class UnsupportedDimensionError(InvalidParameterError):
    """Operation only implemented for d = 2."""


class GridMismatchError(SolverError, ValueError):
    """Operands live on different velocity grids."""


class NonLatticeGridError(SolverError, ValueError):
    """Velocity nodes are not an integer multiple of the lattice spacing."""


class NegativeValueError(SolverError, ValueError):
    """Distribution has values below the negativity tolerance."""


class DegenerateDensityError(SolverError, ArithmeticError):
    """Mean velocity or temperature requested with rho <= rho_floor."""


class CFLViolationError(SolverError, ValueError):
    """Time step exceeds the transport CFL bound."""


class PositivityLossError(SolverError, ArithmeticError):
    """Fluid state lost positive density or internal energy."""


class ResourceGuardError(SolverError, RuntimeError):
    """Computation refused because it exceeds the configured resource guard."""


class ConfigValidationError(SolverError, ValueError):
    """Scenario configuration rejected; ``errors`` holds (field, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{field}: {message}" for field, message in self.errors]
        super().__init__("invalid scenario config: " + "; ".join(lines))


class AcceptanceCheckError(SolverError, AssertionError):
    """A scenario's acceptance gate failed; ``report`` is the written run report."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
