"""Exception taxonomy shared by every module."""


class OtariError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(OtariError):
    pass


class InvalidPerplexity(OtariError):
    pass


class NonFiniteInput(OtariError):
    pass


class InvalidPlan(OtariError):
    """Transport plan violates nonnegativity or marginal feasibility."""


class Overflow(OtariError):
    """An exp argument exceeded the float64 range (caller should rescale)."""


class DomainViolation(OtariError):
    """Bregman divergence undefined: P > 0 where Q = 0."""


class ZeroRow(OtariError):
    pass


class RootBracketFailure(OtariError):
    """Bracket expansion exhausted without straddling the root."""


class MaxIterations(OtariError):
    """Iteration budget exhausted.

    Iterative solvers do not raise this themselves; they return the best
    iterate with converged=False. The class is provided for callers that
    want to escalate non-convergence (see SolveReport.converged).
    """


class InfeasibleEta(OtariError):
    """Global budget below the polytope minimum of the regulariser sum."""


class NonFiniteIterate(OtariError):
    """Dykstra iterate left the float64 range (sigma too small for KL)."""


class SizeGuard(OtariError):
    """Problem exceeds the desk-scale guard of the exact solver."""


class EmptyTrainSet(OtariError):
    pass


class BadMagic(OtariError):
    pass


class TruncatedFile(OtariError):
    pass


class CountMismatch(OtariError):
    pass


class ParseError(OtariError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
