"""Exception hierarchy.

Two roots matter for the CLI exit-code contract: ``InputError`` (bad or
inadmissible input, exit 1) and ``ComputationError`` (a computation that
could not be completed reliably, exit 2).  Assertion failures of checks are
not exceptions; they are reported verdicts (exit 3 at the CLI level).
"""


class InputError(ValueError):
    pass


class ComputationError(RuntimeError):
    pass


# -- linear algebra ---------------------------------------------------------

class NonSymplecticInput(InputError):
    pass


class NotUnitary(InputError):
    pass


class SingularP(InputError):
    pass


class IllConditioned(ComputationError):
    pass


class AmbiguousSpectrum(ComputationError):
    """Spectral classification unstable under tolerance halving."""


# -- paths ------------------------------------------------------------------

class UndersampledPath(ComputationError):
    """A consecutive phase jump reached a quarter turn; the lift is ambiguous."""


class NotALoop(InputError):
    pass


class NonIntegralLift(ComputationError):
    pass


class PersistentDegeneracy(ComputationError):
    pass


class DegenerateA(InputError):
    pass


class SpectralRadiusTooLarge(InputError):
    pass


class UnknownBlockType(InputError):
    pass


# -- toric ------------------------------------------------------------------

class EvaluationAtOrigin(InputError):
    pass


class QuadratureFailure(ComputationError):
    pass


class NotConcave(InputError):
    pass


class EnumerationBudgetExceeded(ComputationError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ResolutionTooCoarse(ComputationError):
    pass


class NonIntegrableHessian(ComputationError):
    pass


# -- flows ------------------------------------------------------------------

class EnergyDriftExceeded(ComputationError):
    pass


class NotConvexField(InputError):
    pass


class SampleBudgetExhausted(ComputationError):
    pass


# -- convexity --------------------------------------------------------------

class UnsortedWidths(InputError):
    pass


class SandwichHypothesisFailed(InputError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ContainmentCheckFailed(ComputationError):
    pass


class NoFeasibleA(ComputationError):
    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = binding


class ConcavityLost(ComputationError):
    pass


# -- cli --------------------------------------------------------------------

class SpecParseError(InputError):
    pass
