"""Exception hierarchy.

Every error raised on purpose by the library derives from ``NoisyLabelError``.
Errors that signal an impossible noise configuration also derive from
``InfeasibleConfiguration`` so the CLI can map them to exit code 2.
"""


class NoisyLabelError(ValueError):
    pass


class InfeasibleConfiguration(NoisyLabelError):
    pass


# simplex / matrices

class NegativeEntry(NoisyLabelError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"entry {index} is negative ({value!r})")


class MassNotOne(NoisyLabelError):
    def __init__(self, deviation, where="vector"):
        self.deviation = deviation
        super().__init__(f"{where} mass deviates from 1 by {deviation:.3e}")


class SingularMatrix(NoisyLabelError):
    pass


class ZeroNoisyClass(NoisyLabelError):
    pass


class NotConditionallyIndependent(NoisyLabelError):
    """Joint violates X independent of Y' given Y."""


# noise channels

class LabelOutOfRange(NoisyLabelError):
    pass


class DegenerateChannel(InfeasibleConfiguration):
    pass


class InfeasibleRates(InfeasibleConfiguration):
    pass


class NonPositiveEntry(InfeasibleConfiguration):
    pass


class NoFlipFound(NoisyLabelError):
    pass


# learners

class EmptyDataset(NoisyLabelError):
    pass


class TooFewSamples(NoisyLabelError):
    pass


class Diverges(NoisyLabelError):
    def __init__(self, message, direction=None):
        self.direction = direction
        super().__init__(message)


class NonFinite(NoisyLabelError):
    pass
