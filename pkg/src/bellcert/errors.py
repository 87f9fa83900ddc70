"""Exception taxonomy shared by all bellcert modules."""


class BellcertError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(BellcertError):
    pass


class NegativeEntry(BellcertError):
    pass


class NotNormalized(BellcertError):
    pass


class ScenarioMismatch(BellcertError):
    pass


class WeightOutOfRange(BellcertError):
    pass


class ParameterOutOfRange(BellcertError):
    pass


class VisibilityOutOfRange(BellcertError):
    pass


class SignalingMarginal(BellcertError):
    pass


class InvalidPermutation(BellcertError):
    pass


class NonUnitObservable(BellcertError):
    pass


class NotFullDimensional(BellcertError):
    pass


class MalformedProgram(BellcertError):
    pass


class NumericalFailure(BellcertError):
    pass


class ConflictingConstraints(BellcertError):
    pass
