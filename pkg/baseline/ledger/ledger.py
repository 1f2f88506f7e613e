from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, List, Optional, Tuple, Union

from baseline.errors import (
    InvalidAddress,
    InvalidAmount,
    InvalidSnapshot,
    UnorderedInput,
    DuplicateKey,
    ZeroShares,
)

# type hinting aliases
AccountId = str
BlockHeight = int
TokenAmount = int

MIN_UINT256 = 0
MAX_UINT256 = 2**256 - 1
MAX_UINT64 = 2**64 - 1

# one token (or one share) in base units
WEI = 10**18
DEPOSIT_SIZE = 32 * WEI

ZERO_ADDRESS: AccountId = "0x" + "00" * 20
BURN_ADDRESS: AccountId = "0xd15a672319cf0352560ee76d9e89eab0889046d3"
STETH_ADDRESS: AccountId = "0xae7ab96520de3a18e5e111b5eaab095312d7fe84"
WSTETH_ADDRESS: AccountId = "0x7f39c581f595b53c5cb19bd0b3f8da6c935e2ca0"

STUDY_FIRST_BLOCK = 11_480_187
STUDY_LAST_BLOCK = 21_145_533
FIRST_TRANSFER_SHARES_BLOCK = 14_860_275
FIRST_WSTETH_BLOCK = 11_888_810

_HEX_DIGITS = set("0123456789abcdef")


def normalize_address(address: Union[str, bytes]) -> AccountId:
    """Return the canonical lowercase 0x-prefixed rendering of a 20-byte address.

    Checksummed (mixed case) input is accepted; the checksum is not verified.
    """
    if isinstance(address, (bytes, bytearray)):
        if len(address) != 20:
            raise InvalidAddress(f"address must be 20 bytes, got {len(address)}")
        return "0x" + bytes(address).hex()
    if not isinstance(address, str):
        raise InvalidAddress(f"unsupported address type {type(address).__name__}")
    text = address.strip().lower()
    if not text.startswith("0x") or len(text) != 42 or not set(text[2:]) <= _HEX_DIGITS:
        raise InvalidAddress(f"not a 20-byte hex address: {address!r}")
    return text


def check_amount(value: int) -> TokenAmount:
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvalidAmount(f"amount must be an integer, got {value!r}")
    if not MIN_UINT256 <= value <= MAX_UINT256:
        raise InvalidAmount(f"{value} does not fit into uint256")
    return value


def mul_div(a: TokenAmount, b: TokenAmount, denominator: TokenAmount) -> TokenAmount:
    """floor(a * b / denominator) for uint256 operands.

    The Solidity version widens the intermediate product to 512 bits. Python
    integers are unbounded, so only the operand and result ranges are checked.
    """
    check_amount(a)
    check_amount(b)
    if denominator == 0:
        raise ZeroDivisionError("mul_div by zero")
    return check_amount((a * b) // denominator)


class Denomination(str, Enum):
    TOKENS = "tokens"
    SHARES = "shares"


@dataclass(frozen=True, slots=True)
class TransferRecord:
    """One Transfer or TransferShares event."""

    block: BlockHeight
    log_index: int
    from_address: AccountId
    to_address: AccountId
    value: TokenAmount
    denomination: Denomination = Denomination.SHARES
    tx_hash: Optional[str] = None

    @property
    def key(self) -> Tuple[int, int]:
        return (self.block, self.log_index)

    @property
    def is_mint(self) -> bool:
        return self.from_address == ZERO_ADDRESS

    def is_burn(self, burn_address: AccountId = BURN_ADDRESS) -> bool:
        return self.to_address == burn_address

    @property
    def is_self_transfer(self) -> bool:
        return self.from_address == self.to_address

    def converted(self, value: TokenAmount, denomination: Denomination) -> "TransferRecord":
        return replace(self, value=value, denomination=denomination)

    def scaled(self, factor: int) -> "TransferRecord":
        return replace(self, value=self.value * factor)


def make_transfer(
    block: int,
    log_index: int,
    from_address: Union[str, bytes],
    to_address: Union[str, bytes],
    value: int,
    denomination: Denomination = Denomination.SHARES,
    tx_hash: Optional[str] = None,
) -> TransferRecord:
    """Build a TransferRecord from raw values, normalizing and range-checking every field."""
    if not 0 <= block <= MAX_UINT64:
        raise InvalidAmount(f"block {block} is not an unsigned 64-bit height")
    if log_index < 0:
        raise InvalidAmount(f"negative log index {log_index}")
    return TransferRecord(
        block=block,
        log_index=log_index,
        from_address=normalize_address(from_address),
        to_address=normalize_address(to_address),
        value=check_amount(value),
        denomination=denomination,
        tx_hash=tx_hash.lower() if tx_hash else None,
    )


def sort_records(records: Iterable[TransferRecord]) -> List[TransferRecord]:
    """Sort by (block, log_index); duplicate keys are rejected."""
    ordered = sorted(records, key=lambda r: r.key)
    for previous, current in zip(ordered, ordered[1:]):
        if previous.key == current.key:
            raise DuplicateKey(current.key)
    return ordered


def check_ordered(records: Iterable[TransferRecord], label: str = "records") -> None:
    previous = None
    for record in records:
        if previous is not None and record.key <= previous:
            raise UnorderedInput(f"{label} not strictly ordered at {record.key} (after {previous})")
        previous = record.key


@dataclass(frozen=True, slots=True)
class LidoStateSnapshot:
    """Lido contract state at the end of one block."""

    block: BlockHeight
    deposited_validators: int
    beacon_validators: int
    beacon_balance: TokenAmount
    buffered_ether: TokenAmount
    total_shares: TokenAmount


def total_pooled_ether(s: LidoStateSnapshot) -> TokenAmount:
    """buffered + beacon + transient, where transient counts 32 ETH per not-yet-visible validator."""
    if s.deposited_validators < s.beacon_validators:
        raise InvalidSnapshot(
            f"block {s.block}: deposited_validators {s.deposited_validators} "
            f"< beacon_validators {s.beacon_validators}"
        )
    transient = (s.deposited_validators - s.beacon_validators) * DEPOSIT_SIZE
    return s.buffered_ether + s.beacon_balance + transient


def share_price(s: LidoStateSnapshot) -> Fraction:
    """Exact pooled-ether base units per share base unit."""
    if s.total_shares == 0:
        raise ZeroShares(f"block {s.block}: total_shares is zero")
    return Fraction(total_pooled_ether(s), s.total_shares)
