"""Exception hierarchy shared by every module."""


class ShapeKrrcError(Exception):
    """Base class for all library errors."""


class InvalidInput(ShapeKrrcError, ValueError):
    pass


class DegenerateConfiguration(InvalidInput):
    """All landmarks coincide, so the configuration has no shape."""


class EmptyInput(InvalidInput):
    pass


class EmptyClass(InvalidInput):
    pass


class InsufficientClassSize(InvalidInput):
    pass


class LabelMismatch(InvalidInput):
    pass


class NonUniqueMean(ShapeKrrcError, ArithmeticError):
    """Top two eigenvalues of the averaged embedding are numerically tied."""


class FactorizationFailure(ShapeKrrcError, ArithmeticError):
    def __init__(self, message, label=None, min_eigenvalue=None):
        super().__init__(message)
        self.label = label
        self.min_eigenvalue = min_eigenvalue


class ParseError(ShapeKrrcError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InconsistentLandmarkCount(ParseError):
    pass


class UnknownLabel(ParseError):
    pass
