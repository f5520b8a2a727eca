"""Exception types shared by all modules."""


class ArtifactError(Exception):
    """Base class for every error raised by the package."""


class NonPositivePressure(ArtifactError):
    pass


class HyperbolicityViolated(ArtifactError):
    pass


class InvalidBackground(ArtifactError):
    pass


class DegenerateJacobian(ArtifactError):
    pass


class LiftInadmissible(ArtifactError):
    pass


class IllConditionedSpectrum(ArtifactError):
    pass


class SingularTransform(ArtifactError):
    pass


class EpsilonOutOfRange(ArtifactError):
    pass


class InertiaChanged(ArtifactError):
    pass


class SolveDiverged(ArtifactError):
    pass


class CFLViolated(ArtifactError):
    pass


class NotCauchy(ArtifactError):
    pass


class NoDecayingBasis(ArtifactError):
    pass


class OrderTooHigh(ArtifactError):
    pass


class ArchiveIncomplete(ArtifactError):
    pass


class AdmissibilityLost(ArtifactError):
    pass


class LinearSolveFailed(ArtifactError):
    pass


class StencilTooCoarse(ArtifactError):
    pass


class ConfigInvalid(ArtifactError):
    pass
