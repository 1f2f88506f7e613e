from .shares import (
    Provenance,
    ShareLedger,
    StateSeries,
    SupplyPoint,
    reconstruct,
    shares_to_tokens,
    supply_series,
    tokens_to_shares,
)

__all__ = [
    "Provenance",
    "ShareLedger",
    "StateSeries",
    "SupplyPoint",
    "reconstruct",
    "shares_to_tokens",
    "supply_series",
    "tokens_to_shares",
]
