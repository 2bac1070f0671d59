"""Exception hierarchy shared by the solver modules."""


class NlwaveError(Exception):
    """Base class for all solver errors."""

    exit_code = 1


class NegativeSymbol(NlwaveError):
    pass


class BadParameter(NlwaveError, ValueError):
    pass


class ShapeMismatch(NlwaveError, ValueError):
    pass


class NonFiniteMultiplier(NlwaveError, ValueError):
    pass


class BadExponent(NlwaveError, ValueError):
    pass


class SingularMode(NlwaveError):
    """The multipoint determinant vanishes (numerically) at some lattice mode."""

    exit_code = 2

    def __init__(self, message, min_abs_d0=None, xi=None):
        super().__init__(message)
        self.min_abs_d0 = min_abs_d0
        self.xi = xi


class DataNotLocalized(NlwaveError):
    pass


class NonFiniteDerivative(NlwaveError):
    pass


class NonlinearOverflow(NlwaveError):
    exit_code = 4


class NoConvergence(NlwaveError):
    exit_code = 3

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class DataTooLarge(NlwaveError):
    pass


class ZeroKernelMode(NlwaveError):
    pass


class MeanNotZero(NlwaveError):
    pass


class QuadratureFailure(NlwaveError):
    pass


class ConfigError(NlwaveError):
    """Raised for unreadable or syntactically broken config files."""


class ValidationError(ConfigError):
    """Collects every violation found in a config, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))



class ParseError(ConfigError):
    """The config file is not valid TOML."""


class IOFailure(NlwaveError):
    exit_code = 5
