"""Exception hierarchy shared by all modules."""


class WCEError(Exception):
    """Base class for every error raised by wce_nuclear."""


class InvalidSpaceError(WCEError, ValueError):
    pass


class UnknownCellError(WCEError, KeyError):
    def __str__(self) -> str:
        # KeyError quotes its argument; keep messages readable
        return str(self.args[0]) if self.args else ""


class EvalError(WCEError, ValueError):
    pass


class InvalidExponentError(WCEError, ValueError):
    pass


class RegimeUnsupportedError(WCEError, ValueError):
    pass


class GeneratorError(WCEError, ValueError):
    pass


class InsufficientDataError(WCEError, ValueError):
    pass


class NonFiniteDataError(WCEError, ValueError):
    pass


class ZeroOperatorError(WCEError, ValueError):
    pass


class ConfigError(WCEError, ValueError):
    pass
