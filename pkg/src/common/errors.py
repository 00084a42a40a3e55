"""
Exception hierarchy shared by every package. Each class carries the process exit code the command line
front end reports when the exception escapes a subcommand.
"""


class SkygridError(Exception):
    exit_code: int = 1


class ConfigError(SkygridError, ValueError):
    exit_code = 2


class DataError(SkygridError, ValueError):
    exit_code = 3


class GenealogyError(DataError):
    pass


class CovariateError(DataError):
    pass


class TraceError(DataError):
    pass


class NumericalError(SkygridError, ArithmeticError):
    exit_code = 4


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception onto the documented exit codes: 2 config, 3 data or I/O, 4 numerical failure.

    :param error: the exception raised by a subcommand
    :return: the process exit status
    """
    if isinstance(error, SkygridError):
        return error.exit_code
    if isinstance(error, OSError):
        return DataError.exit_code
    return 1
