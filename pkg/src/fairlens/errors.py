"""Exception hierarchy shared by all fairlens modules."""


class FairlensError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ShapeError(FairlensError, ValueError):
    exit_code = 2


class ConfigError(FairlensError, ValueError):
    exit_code = 2


class StateError(FairlensError, RuntimeError):
    """A pipeline prerequisite (artifact, trained model) is missing."""

    exit_code = 3


class DataError(FairlensError, ValueError):
    exit_code = 3


class NumericError(FairlensError, ArithmeticError):
    exit_code = 5
