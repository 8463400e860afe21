"""Exception hierarchy shared by every ahoguard module."""


class HomeError(Exception):
    """Base class for all errors raised by ahoguard."""


class DuplicateId(HomeError):
    pass


class UnknownId(HomeError):
    pass


class UnknownDeviceType(HomeError):
    pass


class UnknownDevice(HomeError):
    pass


class UnknownAttribute(HomeError):
    pass


class UnknownAho(HomeError):
    pass


class InvalidValue(HomeError):
    """A value is outside the declared domain of its object."""


class NonMonotonicTimestamp(HomeError):
    pass


class UnknownVerb(HomeError):
    pass


class DeviceOffline(HomeError):
    pass


class CascadeDepthExceeded(HomeError):
    pass


class ConfigError(HomeError):
    """The home configuration or a referenced data file is malformed."""


class PolicyError(HomeError):
    """A policy template violates its structural invariants."""


class MixedTarget(PolicyError):
    pass


class ParseError(HomeError):
    """A source file could not be parsed; carries a line and column."""

    def __init__(self, message: str, *, path: str = "<input>", line: int = 0, column: int = 0):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.path = path
        self.line = line
        self.column = column


class ConflictingTrustClass(HomeError):
    def __init__(self, pairs):
        self.pairs = sorted(pairs)
        super().__init__("sources disagree on writability of: " + ", ".join(self.pairs))


class ScriptParseError(ParseError):
    pass
