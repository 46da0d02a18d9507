"""Exception hierarchy shared by the evaluators."""

from __future__ import annotations


class QmpError(Exception):
    """Base class for all errors raised by :mod:`qmpsim`."""


class DimensionError(QmpError, ValueError):
    """Operands live in Hilbert spaces of different dimension."""


class LabelCollisionError(QmpError, ValueError):
    """Tensor factors share a label namespace."""


class BasisError(QmpError, ValueError):
    """A postselection basis is not orthonormal or not complete."""


class DivergentValueError(QmpError, ArithmeticError):
    """Pre- and postselected states are (numerically) orthogonal.

    The raw numerator is kept so that amplification studies close to the
    divergence can still inspect it.
    """

    def __init__(self, numerator: complex, overlap: float, epsilon: float) -> None:
        self.numerator = numerator
        self.overlap = overlap
        self.epsilon = epsilon
        super().__init__(
            f"divergent value: |<f|i>|^2 = {overlap:.3e} <= {epsilon:.1e} "
            f"(numerator = {numerator!r})"
        )


class ZeroStrengthError(QmpError, ValueError):
    """The measurement does not distinguish the system states at all."""


class UndefinedBranchError(QmpError, ArithmeticError):
    """A conditional quantity was requested on a zero-probability branch."""


class GridError(QmpError, ValueError):
    """The pointer grid cannot hold the shifted wave packets."""
