"""Exceptions raised by slepiankit.

Errors split into two families: `InvalidInputError` for anything the caller
can fix by passing different arguments or files, and `NumericalError` for
failures of the numerics themselves. The command line interfaces map the
former to exit code 2 and the latter to exit code 1.
"""

from __future__ import annotations


class SlepianKitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SlepianKitError, ValueError):
    """A precondition on the inputs was violated."""


class BandlimitMismatchError(InvalidInputError):
    """Two operands were built for different bandlimits."""


class RegionParseError(InvalidInputError):
    """A region description or mask file could not be understood."""


class MeshFormatError(InvalidInputError):
    """A mesh file is malformed."""

    def __init__(self, msg: str, *, line: int | None = None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line


class NotHermitianError(InvalidInputError):
    """Matrix handed to the eigensolver is not Hermitian."""


class NumericalError(SlepianKitError, RuntimeError):
    """A numerical procedure failed."""


class ConvergenceError(NumericalError):
    """Eigensolver did not converge or missed its residual contract."""


class ConcentrationThresholdError(NumericalError):
    """Requested Slepian functions are too poorly concentrated to invert."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""
