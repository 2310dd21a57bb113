"""Exception hierarchy shared by all modules.

Exit-code mapping used by the CLI: contract violations exit with 2,
parameter/precondition problems with 3, capacity problems with 4.
"""


class AlloyMSAError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ParameterError(AlloyMSAError):
    """Invalid argument or violated operation precondition."""

    exit_code = 3


class CapacityError(AlloyMSAError):
    """Dense-matrix size exceeds the configured cap."""

    exit_code = 4


class AnalysisFailure(AlloyMSAError):
    """Leading-index search exhausted its shell cap without a certified hit."""

    exit_code = 3


class ResonantEnergyError(AlloyMSAError):
    """Requested energy is numerically indistinguishable from an eigenvalue."""

    exit_code = 3


class GeometryError(ParameterError):
    """Enlarged boxes overlap; independence assumptions would be broken."""


class ScheduleError(AlloyMSAError):
    """Scale recursion violated one of its asserted bounds."""

    def __init__(self, message, failing_k=None):
        super().__init__(message)
        self.failing_k = failing_k


class FitError(AlloyMSAError):
    """Too little usable data for a least-squares fit."""

    exit_code = 3


class TempleInapplicableError(ParameterError):
    """Temple's inequality precondition <psi, H psi> < xi failed."""


class SolverError(AlloyMSAError):
    """Eigensolver or linear solver did not meet its residual contract."""


class ContractViolation(AlloyMSAError):
    """A numerically checked contract of an operation failed."""
