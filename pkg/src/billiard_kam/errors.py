"""Exception types raised across the package."""


class BilliardKAMError(Exception):
    """Base class for all package errors."""


class ResonantRotation(BilliardKAMError):
    """The rotation number is (numerically) resonant or fails the Diophantine check."""


class DegreeMismatch(BilliardKAMError):
    pass


class NonUnit(BilliardKAMError):
    """Series cannot be inverted because its constant term vanishes."""


class NonzeroConstantTerm(BilliardKAMError):
    pass


class ResonantInput(BilliardKAMError):
    """A difference-operator inverse met a resonant coefficient that is not zero."""


class NonDiagonalInput(BilliardKAMError):
    pass


class BadSeed(BilliardKAMError):
    pass


class NoRoot(BilliardKAMError):
    pass


class DegeneratePivot(BilliardKAMError):
    pass


class VerificationFailed(BilliardKAMError):
    pass


class ToleranceCollapse(BilliardKAMError):
    """Working precision is exhausted: coefficients that should vanish do not."""


class SingularDegree(BilliardKAMError):
    pass


class InsufficientData(BilliardKAMError):
    pass
