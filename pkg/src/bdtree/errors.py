"""Exception hierarchy.

``ValidationError`` covers bad inputs (the CLI maps it to exit code 2) and
``NumericalError`` covers failures of an otherwise valid computation (exit 3).
"""


class BDTreeError(Exception):
    pass


class ValidationError(BDTreeError, ValueError):
    pass


class NumericalError(BDTreeError, ArithmeticError):
    pass


class NonIncreasingTau(ValidationError):
    pass


class TauOutOfRange(ValidationError):
    pass


class InvalidOffspring(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class EqualBranches(ValidationError):
    pass


class NonPositiveHorizon(ValidationError):
    pass


class DegenerateTree(ValidationError):
    pass


class MismatchedConstant(ValidationError):
    pass


class ZeroAtomProbability(ValidationError):
    pass


class BadArguments(ValidationError):
    pass


class MismatchedHorizon(ValidationError):
    pass


class UnsupportedEvent(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class AllNonpositiveConstraint(ValidationError):
    pass


class AntichainTooLarge(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass
