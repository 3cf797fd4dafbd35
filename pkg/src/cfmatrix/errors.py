"""Exception types shared across the package."""


class CFMatrixError(Exception):
    """Base class for all errors raised by this package."""


class DivisionByZero(CFMatrixError):
    """A continued-fraction tail denominator vanished during evaluation.

    The extended value "infinity" is never represented as a floating
    non-finite; it always surfaces as this exception.
    """

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"tail denominator vanished at level {level}")


class InvalidScaling(CFMatrixError):
    """Equivalence-transform scaling factors must satisfy d[0] == 1, d[i] != 0."""


class NotACFraction(CFMatrixError):
    """Operation requires a regular C-fraction (b_i == 1, c_i(z) = c_i * z)."""


class LengthTooShort(CFMatrixError):
    """Continued fraction has too few levels for the requested construction."""


class ShapeViolation(CFMatrixError):
    """Continued fraction does not have the shape required by a construction."""


class SingularAtZ(CFMatrixError):
    """T_n(z) is singular at the evaluation point (the approximant is zero there)."""

    def __init__(self, z, message=None):
        self.z = z
        super().__init__(message or f"pencil is singular at z = {z}")


class IrregularPencil(CFMatrixError):
    """det(T0 - z*T1) vanishes identically; the pencil has no finite spectrum."""


class MultiplePoleDetected(CFMatrixError):
    """Two poles coincide within tolerance; only simple-pole expansions are supported."""


class DimensionMismatch(CFMatrixError):
    """Operand dimensions are inconsistent."""


class NoConvergence(CFMatrixError):
    """An iterative eigenvalue/spectral-radius estimate did not converge."""

    def __init__(self, message, estimate=None):
        self.estimate = estimate
        super().__init__(message)


class ZeroPivot(CFMatrixError):
    """A factorization hit an exactly zero pivot."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"zero pivot in row {row}")


class SingularSchurComplement(CFMatrixError):
    """A block Schur complement in the UDL elimination is singular."""

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"singular Schur complement at block {level}")


class SingularTridiagonalBlock(CFMatrixError):
    """A per-grid-point tridiagonal block in a splitting sweep is singular."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"singular tridiagonal block at grid index {index}")
