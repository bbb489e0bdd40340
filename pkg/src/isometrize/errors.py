"""Exception hierarchy shared by every module."""

from __future__ import annotations


class IsometrizeError(Exception):
    """Base class for all errors raised by this package."""


class NotSquare(IsometrizeError, ValueError):
    pass


class NotHermitian(IsometrizeError, ValueError):
    pass


class NotPSD(IsometrizeError, ValueError):
    pass


class Singular(IsometrizeError, ValueError):
    pass


class DimensionMismatch(IsometrizeError, ValueError):
    pass


class NonFinite(IsometrizeError, ValueError):
    pass


class HypothesisFailed(IsometrizeError):
    """A similarity hypothesis does not hold for the given input.

    ``reasons`` lists every failed hypothesis (machine readable tags);
    ``which`` is the first of them. ``diagnostics`` carries whatever
    estimates were computed before giving up.
    """

    def __init__(self, reasons, diagnostics=None, message=None):
        if isinstance(reasons, str):
            reasons = (reasons,)
        self.reasons = tuple(reasons)
        self.which = self.reasons[0] if self.reasons else "unknown"
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message or "hypothesis failed: " + ", ".join(self.reasons))


class Diverged(IsometrizeError):
    def __init__(self, message="Cesaro averages diverge", bounds=None):
        self.bounds = bounds
        super().__init__(message)


class NotConverged(IsometrizeError):
    """The averaged Gram sequence did not settle; ``result`` holds the fallback."""

    def __init__(self, message="Gram limit not converged", result=None):
        self.result = result
        super().__init__(message)


class NotExpansive(IsometrizeError):
    pass


class PowerUnbounded(IsometrizeError):
    def __init__(self, direction, bounds=None):
        self.direction = direction
        self.bounds = bounds
        super().__init__(f"powers unbounded ({direction})")


class OutOfDomain(IsometrizeError, ValueError):
    pass


class NotApplicable(IsometrizeError):
    pass


class SetTooLarge(IsometrizeError):
    pass


class DoublingFailed(IsometrizeError):
    pass


class RelationError(IsometrizeError, ValueError):
    """Generator images violate a defining relation of the group."""


class LeibnizFailed(IsometrizeError):
    pass


class NotInnerAtTolerance(IsometrizeError):
    def __init__(self, residual, tol, certificate=None):
        self.residual = residual
        self.tol = tol
        self.certificate = certificate
        super().__init__(f"least-squares residual {residual:.3e} exceeds tol {tol:.1e}")


class ParseError(IsometrizeError, ValueError):
    pass


class SchemaError(IsometrizeError, ValueError):
    pass
