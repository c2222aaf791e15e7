"""Exception hierarchy.

Certificate failures are verdicts, not exceptions; everything here signals
that an operation could not produce a meaningful result.
"""


class GasHomotopyError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(GasHomotopyError, ValueError):
    pass


class UndefinedAtPoint(GasHomotopyError, ValueError):
    """A set-valued point was queried as if the field were single-valued."""


class NotInvertible(GasHomotopyError, ValueError):
    pass


class QuadratureFailure(GasHomotopyError, ArithmeticError):
    pass


class BlowUp(GasHomotopyError, ArithmeticError):
    pass


class StepUnderflow(GasHomotopyError, ArithmeticError):
    pass


class GradientVanished(GasHomotopyError, ArithmeticError):
    pass


class StarShapeViolated(GasHomotopyError, ValueError):
    pass


class DegenerateJacobian(GasHomotopyError, ArithmeticError):
    pass


class CertificationFailed(GasHomotopyError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class SpuriousCriticalPoint(GasHomotopyError):
    def __init__(self, message, s=None, witness=None):
        super().__init__(message)
        self.s = s
        self.witness = witness


class NotHurwitz(GasHomotopyError, ValueError):
    pass


class NotSPD(GasHomotopyError, ValueError):
    pass


class EndpointMismatch(GasHomotopyError, ValueError):
    pass


class EigenFailure(GasHomotopyError, ArithmeticError):
    pass


class SingularSystem(GasHomotopyError, ArithmeticError):
    pass


class VanishesOnCircle(GasHomotopyError, ValueError):
    pass


class UnboundedSup(GasHomotopyError, ArithmeticError):
    pass


class AtProjectionPole(GasHomotopyError, ValueError):
    pass


class NearProjectionPole(GasHomotopyError, ArithmeticError):
    pass


class UnknownExample(GasHomotopyError, KeyError):
    pass


class UnsupportedDimension(GasHomotopyError, ValueError):
    pass
