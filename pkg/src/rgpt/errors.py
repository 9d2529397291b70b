"""Exception hierarchy.

Data problems (bad values, shapes, files) derive from :class:`DataError`;
configuration problems derive from :class:`ConfigError`.  The CLI maps the
two families onto distinct exit codes.
"""


class RgptError(Exception):
    pass


class ConfigError(RgptError, ValueError):
    pass


class DataError(RgptError, ValueError):
    pass


class BadConfig(ConfigError):
    pass


class BadWeights(ConfigError):
    pass


class BadK(ConfigError):
    pass


class BadFraction(ConfigError):
    pass


class OutOfRangeRisk(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class TooFewSamples(DataError):
    pass


class EmptySubset(DataError):
    pass


class EmptyVector(DataError):
    pass


class LengthMismatch(DataError):
    pass


class PriorShapeMismatch(DataError):
    pass


class NoFeatures(DataError):
    pass


class TooLarge(RgptError, ValueError):
    pass
