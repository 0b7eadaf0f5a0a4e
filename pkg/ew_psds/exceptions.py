class EwPsdsError(Exception):
    pass


class InputError(EwPsdsError, ValueError):
    """Bad input file, argument or configuration value."""


class LineError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


# -------------------------------------
# Annotation files
# -------------------------------------
class MalformedRow(LineError):
    pass


class InvalidInterval(LineError):
    pass


class DuplicateClip(LineError):
    pass


class NonPositiveDuration(LineError):
    pass


class GapInFrames(LineError):
    pass


class ScoreOutOfRange(LineError):
    pass


class MissingDuration(InputError):
    pass


class VocabularyMismatch(InputError):
    pass


class UnknownClip(InputError):
    pass


# -------------------------------------
# Scoring
# -------------------------------------
class ZeroDuration(InputError):
    pass


class MissingOperatingPoints(InputError):
    pass


class NonPositiveEnergy(InputError):
    pass


class InstanceTooLarge(InputError):
    pass


# -------------------------------------
# Energy metering
# -------------------------------------
class TooFewSamples(InputError):
    pass


class NonMonotonicTimestamps(InputError):
    pass


class SourceUnavailable(InputError):
    pass


class UnknownRegion(InputError):
    pass


class CommandFailed(EwPsdsError):
    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


# -------------------------------------
# Reports and configuration
# -------------------------------------
class NoBaseline(InputError):
    pass


class MissingSplit(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
