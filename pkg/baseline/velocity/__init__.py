from .velocity import (
    GLOBAL_SCOPE,
    WEEK_BLOCKS,
    AccountState,
    HoldingDistribution,
    LedgerState,
    Parcel,
    Scope,
    VelocitySample,
    apply_transfer,
    global_velocity,
    holding_distribution,
    micro_velocity,
    replay,
    sample_series,
    window_average,
)

__all__ = [
    "GLOBAL_SCOPE",
    "WEEK_BLOCKS",
    "AccountState",
    "HoldingDistribution",
    "LedgerState",
    "Parcel",
    "Scope",
    "VelocitySample",
    "apply_transfer",
    "global_velocity",
    "holding_distribution",
    "micro_velocity",
    "replay",
    "sample_series",
    "window_average",
]
