"""Exception types raised by addrtaint."""


class AddrTaintError(Exception):
    """Base class for every error raised by this package."""


# chain validity

class InvalidTransaction(AddrTaintError, ValueError):
    pass


class DuplicateTxid(AddrTaintError, ValueError):
    pass


class DanglingInputRef(AddrTaintError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DoubleSpend(AddrTaintError, ValueError):
    pass


class ValueNotConserved(AddrTaintError, ValueError):
    pass


class CoinbaseHasNoFee(AddrTaintError, ValueError):
    pass


class UnknownTxid(AddrTaintError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# file formats

class ParseError(AddrTaintError, ValueError):
    def __init__(self, line, reason, path=None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {reason}")


class CalibrationError(AddrTaintError, ValueError):
    pass


class UnknownShapeKeyword(CalibrationError):
    pass


class NegativeFee(CalibrationError):
    pass


class MissingField(CalibrationError):
    pass


class UnknownField(CalibrationError):
    pass


class UnknownService(AddrTaintError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# engines

class InvalidWindow(AddrTaintError, ValueError):
    pass


class EmptySeed(AddrTaintError, ValueError):
    pass


class UnknownSeedOutput(AddrTaintError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MissingKnownCase(AddrTaintError, ValueError):
    pass


class UnknownMethod(AddrTaintError, ValueError):
    pass


class DisabledCriterion(AddrTaintError, ValueError):
    pass


# simulator

class InvalidScenario(AddrTaintError, ValueError):
    pass


class InfeasibleScenario(AddrTaintError, ValueError):
    pass
