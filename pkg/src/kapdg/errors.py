"""Exception types shared across the solver."""


class KapdgError(Exception):
    pass


class NonPhysicalDensityError(KapdgError):
    """Mixture density is zero or negative where a positive one is required."""


class NonHyperbolicStateError(KapdgError):
    """Transport sound speed has a negative radicand."""


class SingularCompressibilityError(KapdgError):
    """The Wood compressibility sum vanished."""


class InternalInvariantError(KapdgError):
    """A condition that is provably impossible was observed anyway."""


class UsageError(KapdgError):
    """Bad run configuration or command-line input."""


class SolverFailure(KapdgError):
    """Unrecoverable state encountered during a run.

    Carries enough context (time, cell, offending quantity) to locate the
    failure in a long simulation.
    """

    def __init__(self, message, t=None, cell=None, quantity=None):
        self.t = t
        if cell is not None and not isinstance(cell, (int, str)):
            cell = tuple(int(v) for v in cell)
        self.cell = cell
        self.quantity = quantity
        parts = [message]
        if t is not None:
            parts.append(f"t={t:.6g}")
        if cell is not None:
            parts.append(f"cell={cell}")
        if quantity is not None:
            parts.append(f"quantity={quantity}")
        super().__init__(", ".join(parts))
