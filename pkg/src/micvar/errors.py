"""Exception hierarchy.

``DataError`` subclasses describe problems with the input (bad files, too
little data); ``NumericalError`` subclasses describe failures of a linear
algebra step or a violated modelling assumption. The CLI maps the two
families to different exit codes.
"""

from __future__ import annotations


class MicvarError(Exception):
    """Base class for every error raised by this package."""


class DataError(MicvarError, ValueError):
    pass


class NumericalError(MicvarError, ArithmeticError):
    pass


# -- data errors -------------------------------------------------------------


class ParseError(DataError):
    def __init__(self, line: int, detail: str = ""):
        self.line = line
        super().__init__(f"line {line}: could not parse numeric value {detail}".rstrip())


class RaggedRow(DataError):
    def __init__(self, line: int, expected: int, got: int):
        self.line = line
        super().__init__(f"line {line}: expected {expected} columns, got {got}")


class NonFinite(DataError):
    def __init__(self, line: int, col: int):
        self.line, self.col = line, col
        super().__init__(f"line {line}, column {col}: non-finite value")


class NonPositiveEntry(DataError):
    def __init__(self, t: int, j: int):
        self.t, self.j = t, j
        super().__init__(f"entry ({t}, {j}) is not positive; log undefined")


class TooShort(DataError):
    pass


class ZeroVariance(DataError):
    def __init__(self, j: int):
        self.j = j
        super().__init__(f"column {j} has zero sample variance")


class InsufficientData(DataError):
    def __init__(self, n: int, p: int, detail: str = ""):
        self.n, self.p = n, p
        msg = f"n={n} observations is not enough for order p={p}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class ConfigError(DataError):
    pass


# -- numerical errors --------------------------------------------------------


class UnstableProcess(NumericalError):
    def __init__(self, radius: float):
        self.radius = radius
        super().__init__(f"companion spectral radius {radius:.6g} is not below 1")


class LyapunovSolveFailed(NumericalError):
    pass


class SingularToeplitz(NumericalError):
    def __init__(self, p: int):
        self.p = p
        super().__init__(f"block Toeplitz autocovariance matrix of order {p} is singular")


class SingularGram(NumericalError):
    def __init__(self, p: int, condition: float):
        self.p, self.condition = p, condition
        super().__init__(f"regressor Gram matrix at order p={p} is singular (cond ~ {condition:.3g})")


class SingularSigma(NumericalError):
    def __init__(self, p: int):
        self.p = p
        super().__init__(f"residual covariance at order p={p} is singular; log-determinant undefined")


class NonpositiveWindow(NumericalError):
    def __init__(self, m: float):
        self.m = m
        super().__init__(f"oracle window M={m:.6g} is not positive; process assumptions violated")


class StabilityRejectionExceeded(NumericalError):
    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(f"no stable coefficient draw after {attempts} attempts")
