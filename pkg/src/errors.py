"""Exception hierarchy shared by the library and the CLI."""


class SpectrumLabError(Exception):
    pass


class ParameterError(SpectrumLabError, ValueError):
    """非法概率 / 温度 / 维度"""


class ClosedFormError(SpectrumLabError, ArithmeticError):
    """解析式无定义: 退化链, 界不存在, 截断不够"""


class SolverError(SpectrumLabError, RuntimeError):
    pass


class ConfigError(SpectrumLabError):
    pass


class ValidationFailure(SpectrumLabError):
    pass


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2


def exit_code_for(exc):
    if exc is None:
        return EXIT_OK
    if isinstance(exc, ValidationFailure):
        return EXIT_VALIDATION
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    return EXIT_VALIDATION
