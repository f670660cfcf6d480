"""Exception hierarchy shared by every module."""


class QMarkovError(Exception):
    """Base class for all package errors."""


class LayoutError(QMarkovError):
    pass


class NumericError(QMarkovError):
    pass


class DegeneracyError(QMarkovError):
    pass


class StructureError(QMarkovError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotMarkovError(QMarkovError):
    def __init__(self, message, cmi_values=None):
        super().__init__(message)
        self.cmi_values = dict(cmi_values or {})


class MatchError(QMarkovError):
    pass


class CertificateError(QMarkovError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class FullSupportError(QMarkovError):
    pass


class GenError(QMarkovError):
    pass


class ParseError(QMarkovError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(QMarkovError):
    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
