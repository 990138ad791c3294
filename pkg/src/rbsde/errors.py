"""Exception hierarchy shared by every module."""


class RBSDEError(Exception):
    """Base class for all package errors."""


class InvalidInput(RBSDEError, ValueError):
    pass


class ConfigError(RBSDEError, ValueError):
    pass


class AssumptionError(RBSDEError):
    """A scenario failed one of the structural validators.

    ``report`` is the failing :class:`~rbsde.model.AssumptionReport`.
    """

    def __init__(self, report):
        self.report = report
        super().__init__(f"{report.name} failed: {report.message} (witness={report.witness})")


class ResourceError(RBSDEError):
    pass


class NonConvergence(RBSDEError):
    """Picard iteration did not settle within ``max_iter``."""

    def __init__(self, residual, iters, layer=None, k=None):
        self.residual = residual
        self.iters = iters
        self.layer = layer
        self.k = k
        where = []
        if layer is not None:
            where.append(f"layer {layer}")
        if k is not None:
            where.append(f"k={k:g}")
        loc = f" at {', '.join(where)}" if where else ""
        super().__init__(
            f"Picard iteration did not converge{loc} after {iters} iterations "
            f"(last residual {residual:.3e}); reduce the time step"
        )


class RegressionError(RBSDEError):
    def __init__(self, message, feature=None):
        self.feature = feature
        super().__init__(message)


class UnsupportedEngine(RBSDEError):
    pass
