"""Exception hierarchy shared by every module."""


class SspsError(Exception):
    """Base class for all toolkit errors."""


class NoReachableTscc(SspsError):
    """No terminal strongly connected component is reachable from the initial distribution."""


class InvalidPolicy(SspsError):
    pass


class InvalidMdp(SspsError):
    pass


class NotUnichain(SspsError):
    """A block handed to the stationary solver does not have a unique stationary distribution."""


class NonTransientBlock(SspsError):
    """I - Z is singular, so the block is not transient."""


class InvalidSpec(SspsError):
    pass


class InvalidParameter(SspsError):
    pass


class SolverError(SspsError):
    """Numerical failure inside an LP solver."""


class Infeasible(SspsError):
    def __init__(self, message, lp_name=None):
        super().__init__(message)
        self.lp_name = lp_name


class BudgetExhausted(SspsError):
    pass
