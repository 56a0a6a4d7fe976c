"""Exception hierarchy shared by every calibgraph module."""


class CalibError(Exception):
    """Base class for all calibgraph errors."""


class InvalidArgumentError(CalibError, ValueError):
    pass


class BranchError(CalibError, ValueError):
    """Logarithm requested too close to a rotation of pi, where the axis is ambiguous."""


class ConnectivityError(CalibError):
    """The calibration graph splits into more than one connected component."""

    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        listing = "; ".join("{" + ", ".join(map(str, c)) + "}" for c in self.components)
        super().__init__(f"graph is disconnected into {len(self.components)} components: {listing}")


class NumericalError(CalibError):
    pass


class ConvergenceError(NumericalError):
    pass


class DegenerateMotionError(CalibError):
    """Motion set does not excite enough rotation axes to determine a hand-eye transform."""


class UnderConstrainedError(DegenerateMotionError):
    def __init__(self, message, null_direction):
        self.null_direction = null_direction
        super().__init__(message)


class EstimatorError(CalibError):
    """A leave-one-out estimate failed; ``omitted`` is the index of the dropped sample."""

    def __init__(self, omitted, cause):
        self.omitted = omitted
        self.cause = cause
        super().__init__(f"estimator failed with sample {omitted} omitted: {cause}")


class ParseError(CalibError, ValueError):
    def __init__(self, message, lineno=None, path=None):
        self.reason = message
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)

    def at(self, path):
        """Same error, attributed to ``path``."""
        return ParseError(self.reason, self.lineno, path)
