"""Exception hierarchy shared across the package."""


class AquanetError(Exception):
    """Base class for all package errors."""

    category = "error"


class NetworkFileError(AquanetError):
    """Malformed network file (syntax, duplicate ids, dangling refs, bad geometry)."""

    category = "network-file"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class HydraulicsError(AquanetError):
    """Inconsistent or malformed hydraulic schedule."""

    category = "hydraulics"


class ScenarioError(AquanetError):
    """Malformed scenario file or unsupported scenario option."""

    category = "scenario"


class CflViolationError(AquanetError):
    """Courant number outside the range an explicit scheme tolerates."""

    category = "cfl"


class MassBalanceError(AquanetError):
    """Fatal mass-balance breakdown (drained tank, inflow exceeding pipe volume)."""

    category = "mass-balance"


class SolverError(AquanetError):
    """Linear step solve failed or left an unacceptable residual."""

    category = "solver"
