"""Exception types raised by the solvers."""


class DomainError(ValueError):
    """Parameters or fields outside the admissible range."""


class GridMismatch(ValueError):
    pass


class NoBracket(RuntimeError):
    """Both shooting amplitudes classify identically."""


class NoConvergence(RuntimeError):
    pass


class StepFailure(FloatingPointError):
    """Non-finite state produced by a time step."""


class InsufficientData(ValueError):
    pass
