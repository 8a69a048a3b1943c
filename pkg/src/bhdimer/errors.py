class NumericalError(RuntimeError):
    """A numerical procedure failed (no convergence, no signal, ambiguous match)."""


class PerturbativeValidityWarning(UserWarning):
    """Omega/U is too large for the leading-order closed forms to be trusted."""
