"""Exception hierarchy shared by all tofwave modules."""


class TofwaveError(Exception):
    """Base class for all errors raised by tofwave."""


# model
class NoStableRoot(TofwaveError):
    pass


class AmbiguousRoot(TofwaveError, UserWarning):
    pass


# gridw
class NonFiniteField(TofwaveError):
    pass


# profile
class DimensionMismatch(TofwaveError):
    pass


class NewtonDiverged(TofwaveError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularJacobian(TofwaveError):
    pass


class BoundaryTooTight(TofwaveError):
    pass


class ContinuationStalled(TofwaveError):
    def __init__(self, message, family=None):
        super().__init__(message)
        self.family = family or []


# spectral
class InsufficientSamples(TofwaveError):
    pass


class NoConvergence(TofwaveError):
    pass


class BranchCollision(TofwaveError):
    pass


class SingularA(TofwaveError):
    pass


class NullSpaceAmbiguous(TofwaveError):
    pass


class SolveFailed(TofwaveError):
    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


# evolution
class NonFiniteState(TofwaveError):
    pass


class DecompositionLost(TofwaveError):
    pass


class NewtonFailed(TofwaveError):
    pass


class DerivativeDegenerate(TofwaveError):
    pass


class EmptyWindow(TofwaveError):
    pass


class NonPositiveValues(TofwaveError):
    pass


class TailNotSettled(TofwaveError):
    pass


# verify
class QuadratureNotConverged(TofwaveError):
    pass


class IterationDiverged(TofwaveError):
    pass


class OutsideSmallnessBall(TofwaveError):
    pass


# cli / config
class ConfigError(TofwaveError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass
