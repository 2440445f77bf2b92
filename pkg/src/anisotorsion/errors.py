"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NotCanonicalError(DomainError):
    """Domain is not translated/dilated so that its anisotropic incenter is the
    origin and its anisotropic inradius is one."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    The partial history (energies or eigenvalue estimates) is kept on
    ``history`` so callers can inspect what went wrong.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
