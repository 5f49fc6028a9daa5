"""Exception types shared across the package."""


class GaussLMError(ValueError):
    """Base class for numerical-domain failures."""


class NotIntegrableError(GaussLMError):
    """A requested Gaussian moment is infinite (I + sA is not positive definite)."""


class UndefinedError(GaussLMError):
    """The functional is undefined at the requested order (e.g. M at s = 0)."""


class DivergentError(GaussLMError):
    """A Monte Carlo estimate did not stabilise within its sample budget."""
