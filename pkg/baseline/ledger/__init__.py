from .ledger import (
    AccountId,
    Denomination,
    LidoStateSnapshot,
    TransferRecord,
    make_transfer,
    mul_div,
    normalize_address,
    share_price,
    sort_records,
    total_pooled_ether,
)

__all__ = [
    "AccountId",
    "Denomination",
    "LidoStateSnapshot",
    "TransferRecord",
    "make_transfer",
    "mul_div",
    "normalize_address",
    "share_price",
    "sort_records",
    "total_pooled_ether",
]
