"""Exception hierarchy shared by every module."""


class MeasimError(Exception):
    """Base class for all package errors."""


class InvalidOperator(MeasimError):
    pass


class InvalidState(MeasimError):
    pass


class DimMismatch(MeasimError):
    pass


class BadLayout(MeasimError):
    pass


class NotPsd(MeasimError):
    pass


class BadPmf(MeasimError):
    pass


class InvalidPovm(MeasimError):
    pass


class InvalidInstrument(MeasimError):
    pass


class Unsupported(MeasimError):
    pass


class BadRefinement(MeasimError):
    pass


class SizeLimit(MeasimError):
    """Raised when an enumeration or operator would exceed the ambient cap."""

    def __init__(self, what: str, size: int, cap: int):
        self.what = what
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: size {size} exceeds cap {cap}")


class BadSequence(MeasimError):
    pass


class EmptyTypicalSet(MeasimError):
    pass


class SubPovmViolation(MeasimError):
    pass


class BadRange(MeasimError):
    pass


class DecodeFailure(MeasimError):
    """No sequential test fired; carries the per-step outcomes."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        super().__init__(f"all {len(self.outcomes)} tests answered no")


class BadEffect(MeasimError):
    pass


class BadProjector(MeasimError):
    pass


class BadSampler(MeasimError):
    pass


class ParseError(MeasimError):
    """Problem-file diagnostic with a field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
