"""Exception types shared across the package."""


class NotHermitianError(ValueError):
    """A matrix expected to be Hermitian failed the symmetry check."""


class NoConvergence(RuntimeError):
    """An iterative search exhausted its budget without meeting tolerance."""

    def __init__(self, message, best_value=None, best_x=None):
        super().__init__(message)
        self.best_value = best_value
        self.best_x = best_x


class IllConditioned(RuntimeError):
    """The linearized control system is numerically rank deficient."""

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class BadPositions(ValueError):
    pass


class BranchAmbiguity(ValueError):
    """Principal logarithm needs an arbitrary choice at the -1 branch cut."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class AtomNotInCell(ValueError):
    pass


class MissingSchedule(KeyError):
    pass
