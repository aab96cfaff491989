"""Exception hierarchy shared by every streaklab module."""


class StreakError(ValueError):
    """Base class for all domain errors raised by streaklab."""


class EmptyInput(StreakError):
    pass


class InvalidCharacter(StreakError):
    def __init__(self, position: int, char: str):
        self.position = position
        self.char = char
        super().__init__(f"invalid character {char!r} at position {position}")


class TooLong(StreakError):
    pass


class RunTooLong(StreakError):
    """The conditioning run length leaves no position to condition on."""


class EmptyList(StreakError):
    pass


class KTooLarge(StreakError):
    pass


class InvalidRange(StreakError):
    pass


class PatternTooLong(StreakError):
    pass


class PolicyNotAllowed(StreakError):
    pass


class ZeroDefinedDraws(StreakError):
    pass


class AllUndefined(StreakError):
    pass


class DegenerateHitRate(StreakError):
    pass


class EmptyFile(StreakError):
    pass


class ParseError(StreakError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")
