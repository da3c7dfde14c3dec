"""Exception hierarchy.

Grouped by the CLI exit code each family maps to: data problems (2),
numerical breakdown while building the penalty (3), sampler failures (4).
"""


class TpsError(Exception):
    exit_code = 1


class DataError(TpsError, ValueError):
    exit_code = 2


class NumericalError(TpsError, ArithmeticError):
    exit_code = 3


class SamplerError(TpsError, RuntimeError):
    exit_code = 4


class TooFewSites(DataError):
    pass


class DuplicateSites(DataError):
    pass


class CollinearSites(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class MissingColumn(DataError):
    pass


class NonPositiveForLog(DataError):
    pass


class ParseError(DataError):
    pass


class IllConditionedBasis(NumericalError):
    pass


class DegenerateRank(NumericalError):
    pass


class NonPositiveEta(SamplerError, ValueError):
    pass


class NonPositiveDelta0(SamplerError, ValueError):
    pass


class UnboundedPosterior(SamplerError):
    pass


class AcceptanceStall(SamplerError):
    pass


class ZeroVariance(SamplerError, ValueError):
    pass


class TooShort(SamplerError, ValueError):
    pass
