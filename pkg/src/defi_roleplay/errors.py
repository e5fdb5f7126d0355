"""Exception hierarchy shared by every simulator component."""


class SimulationError(Exception):
    """Base class for anything a simulated operation can refuse to do."""


class DuplicateIdError(SimulationError):
    pass


class UnknownIdError(SimulationError):
    pass


class InsufficientBalanceError(SimulationError):
    """A debit exceeds the holder's balance; marks a strategy step infeasible."""


class CapacityExceededError(SimulationError):
    """Borrow would push debt value above collateral value times CR."""


class LiquidityExhaustedError(SimulationError):
    """The market (or flash provider) does not hold enough of the asset."""


class OverpayError(SimulationError):
    pass


class UnhealthyWithdrawError(SimulationError):
    pass


class TargetHealthyError(SimulationError):
    pass


class SeizureExceedsCollateralError(SimulationError):
    pass


class UnpricedAssetError(SimulationError):
    pass


class UnrepaidFlashloanError(SimulationError):
    """An event ended with an open flashloan handle."""


class InfeasibleParametersError(SimulationError):
    """Closed-form evaluation hit a degenerate denominator or invalid domain."""


class ScenarioError(ValueError):
    """Scenario file could not be parsed or failed validation."""
