"""Exception types raised by the qmke library."""


class MKEError(ValueError):
    """Base class for all qmke errors."""

    kind = "mke-error"

    def to_record(self):
        """Machine-readable form used by the CLI."""
        return {"error": self.kind, "message": str(self)}


class DomainError(MKEError):
    kind = "domain-error"


class ConfigurationError(MKEError):
    kind = "configuration-error"


class RankDeficiencyError(MKEError):
    """Logarithm requested for a state that is (numerically) pure."""

    kind = "rank-deficiency"


class UndefinedDivergenceError(MKEError):
    """Relative entropy is infinite: support of rho not inside support of tau."""

    kind = "undefined-divergence"


class ExponentOverflowError(MKEError, OverflowError):
    kind = "overflow"


class TrivialObservableError(MKEError):
    """Observable proportional to the identity carries no information."""

    kind = "trivial-observable"


DegenerateConstraintError = TrivialObservableError


class InfeasibleMeanError(MKEError):
    kind = "infeasible-mean"


class InfeasibleConstraintError(MKEError):
    kind = "infeasible-constraint"


class PriorRankError(MKEError):
    kind = "prior-rank"


class BoundaryConstraintError(MKEError):
    kind = "boundary-constraint"


class ConvergenceError(MKEError):
    kind = "convergence"

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations

    def to_record(self):
        rec = super().to_record()
        rec["residual"] = self.residual
        rec["iterations"] = self.iterations
        return rec


class DegeneratePriorError(MKEError):
    """Hamiltonian estimate requested from the maximally mixed prior."""

    kind = "degenerate-prior"


class SolverError(MKEError):
    """Wraps an error from one solver inside :func:`qmke.solvers.mke_pair`."""

    kind = "solver-error"

    def __init__(self, solver, cause):
        super().__init__(f"{solver} solver failed: {cause}")
        self.solver = solver
        self.cause = cause

    def to_record(self):
        rec = self.cause.to_record() if isinstance(self.cause, MKEError) else {
            "error": type(self.cause).__name__, "message": str(self.cause)}
        rec["solver"] = self.solver
        return rec
