"""Exception hierarchy shared by every module."""


class CbfLabError(Exception):
    """Base class for all library errors."""


class ScenarioError(CbfLabError, ValueError):
    """Raw scenario data violates a type invariant."""


class NotStabilizable(ScenarioError):
    pass


class RankDeficientB(ScenarioError):
    pass


class OriginUnsafe(ScenarioError):
    pass


class BadShapeMatrix(ScenarioError):
    pass


class DegenerateGradient(CbfLabError):
    """The filter correction is undefined: B^T grad h vanishes where eta < 0."""


class WrongActuation(CbfLabError):
    pass


class AssumptionViolated(CbfLabError):
    pass


class NotEigenvector(CbfLabError):
    pass


class ComplexSpectrum(CbfLabError):
    pass


class EigenvectorDegenerate(CbfLabError):
    pass


class RootFindingFailed(CbfLabError):
    pass


class UnsafeStart(CbfLabError):
    pass


class NotSaddle(CbfLabError):
    pass


class WindowExcludesObstacle(CbfLabError):
    pass
