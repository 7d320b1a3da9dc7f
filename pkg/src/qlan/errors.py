"""Exception hierarchy.

Every error carries an ``exit_code`` class attribute so the command line
front end can map failures onto its documented exit statuses without a
lookup table.
"""


class QlanError(Exception):
    """Base class for all library errors."""

    exit_code = 4


# -- validation (exit 3) ----------------------------------------------------

class ValidationError(QlanError, ValueError):
    exit_code = 3


class NonHermitianHamiltonian(ValidationError):
    pass


class ZeroCoupling(ValidationError):
    pass


class BadChannel(ValidationError, IndexError):
    pass


class MissingSecondDerivatives(ValidationError):
    pass


class CutoffTooSmall(ValidationError):
    pass


# -- irreducibility certificates (exit 2) -----------------------------------

class IrreducibilityError(QlanError):
    exit_code = 2


class NotIrreducible(IrreducibilityError):
    pass


class NotFullRank(IrreducibilityError):
    pass


class NoStationaryState(IrreducibilityError):
    pass


class SingularOnComplement(IrreducibilityError):
    pass


# -- numerical failures (exit 4) --------------------------------------------

class NumericalError(QlanError, ArithmeticError):
    exit_code = 4


class Overflow(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    pass


class DegenerateMean(NumericalError):
    pass


class BoundViolated(NumericalError):
    pass


class BranchCut(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass


class StateBlowup(NumericalError):
    pass
