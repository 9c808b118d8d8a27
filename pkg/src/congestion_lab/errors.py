"""Exception hierarchy shared by all modules."""


class CongestionLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CongestionLabError, ValueError):
    """Bad model, design or experiment configuration (CLI exit code 2)."""


class DataError(CongestionLabError, ValueError):
    """Bad or unusable input data (CLI exit code 3)."""


class NonPositiveRate(ConfigError):
    pass


class InvalidPrice(ConfigError):
    pass


class InvalidProbability(ConfigError):
    pass


class UnknownScenario(ConfigError):
    pass


class InvalidDesign(ConfigError):
    pass


class InvalidTrace(ConfigError):
    pass


class InvalidAlpha(ConfigError):
    pass


class SingularSystem(DataError):
    pass


class BadTraceCSV(DataError):
    pass


class CorruptLog(DataError):
    pass


class EmptyArm(DataError):
    pass


class EmptyCell(DataError):
    pass


class WrongDesign(DataError):
    pass


class KernelTooLong(DataError):
    pass
