"""Exception hierarchy shared by all modules."""


class ASMHError(Exception):
    """Base class for every error raised by this package."""


class LinAlgError(ASMHError):
    """Invalid input to, or failure of, a dense linear-algebra routine."""


class ConvergenceError(LinAlgError):
    def __init__(self, message, max_sweeps):
        super().__init__(message)
        self.max_sweeps = max_sweeps


class SubspaceError(ASMHError):
    """An active subspace could not be constructed from the given data."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class TargetError(ASMHError):
    """Invalid density specification."""


class ODEError(ASMHError):
    """Invalid ODE parameters or a failed ground-truth integration."""


class SamplerError(ASMHError):
    """Invalid sampler input (bad start, NaN densities, ...)."""


class DiagnosticsError(ASMHError):
    """Diagnostics could not be computed on the given chain."""


class ConfigError(ASMHError):
    """One or more problems in a run configuration.

    All problems found are collected in ``errors``.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
