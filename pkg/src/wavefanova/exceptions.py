"""Error types raised by the package.

All derive from ``ValueError`` so callers that validate generically keep
working; the class name carries the specific failure.
"""


class WaveFanovaError(ValueError):
    pass


class NonDyadicLength(WaveFanovaError):
    pass


class BadLevelRange(WaveFanovaError):
    pass


class MalformedPyramid(WaveFanovaError):
    pass


class OutOfModelRange(WaveFanovaError):
    pass


class DegenerateSeries(WaveFanovaError):
    pass


class NonStationaryRho(WaveFanovaError):
    pass


class NeedTwoCurves(WaveFanovaError):
    pass


class EtaOutOfRange(WaveFanovaError):
    pass


class ZeroVariance(WaveFanovaError):
    pass


class InsufficientData(WaveFanovaError):
    pass
