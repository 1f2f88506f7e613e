from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from baseline.errors import (
    EmptyAccount,
    InsufficientBalance,
    NonMonotonicBlock,
    UnorderedInput,
    ZeroSupply,
)
from baseline.ledger.ledger import (
    BURN_ADDRESS,
    ZERO_ADDRESS,
    AccountId,
    BlockHeight,
    TokenAmount,
    TransferRecord,
)

logger = logging.getLogger(__name__)

GLOBAL_SCOPE = "global"

# one week of 12-second blocks
WEEK_BLOCKS = 50_400

DEFAULT_EXCLUDED = (ZERO_ADDRESS, BURN_ADDRESS)


@dataclass(slots=True)
class Parcel:
    acquired_block: BlockHeight
    amount: TokenAmount


class AccountState:
    """LIFO stack of parcels; the top of the stack is the end of the list."""

    __slots__ = ("parcels", "balance")

    def __init__(self):
        self.parcels: List[Parcel] = []
        self.balance: TokenAmount = 0

    def push(self, block: BlockHeight, amount: TokenAmount) -> None:
        if amount <= 0:
            return
        self.parcels.append(Parcel(block, amount))
        self.balance += amount

    def spend(self, amount: TokenAmount) -> List[Tuple[BlockHeight, TokenAmount]]:
        """Consume `amount` from the most recent parcels first.

        Returns the consumed (acquired_block, amount) pieces, newest first.
        """
        if amount > self.balance:
            raise InsufficientBalance(f"spend of {amount} exceeds balance {self.balance}")
        consumed = []
        remaining = amount
        parcels = self.parcels
        while remaining:
            top = parcels[-1]
            if top.amount <= remaining:
                parcels.pop()
                consumed.append((top.acquired_block, top.amount))
                remaining -= top.amount
            else:
                # a partially consumed parcel keeps its acquisition block
                top.amount -= remaining
                consumed.append((top.acquired_block, remaining))
                remaining = 0
        self.balance -= amount
        return consumed

    def snapshot(self) -> List[Tuple[BlockHeight, TokenAmount]]:
        """Parcels bottom to top as plain tuples."""
        return [(p.acquired_block, p.amount) for p in self.parcels]


@dataclass(frozen=True)
class HoldingDistribution:
    owner: AccountId
    at_block: BlockHeight
    entries: Dict[int, TokenAmount] = field(default_factory=dict)

    @property
    def money(self) -> TokenAmount:
        return sum(self.entries.values())


class Scope(str, Enum):
    GLOBAL = "global"
    ACCOUNTS = "accounts"
    ALL = "all"


@dataclass(frozen=True)
class VelocitySample:
    """Velocity in block^-1 for one account (scope = its address) or the whole ledger (scope = "global")."""

    at_block: BlockHeight
    scope: str
    velocity: float
    money: TokenAmount

    @property
    def is_global(self) -> bool:
        return self.scope == GLOBAL_SCOPE


def _holding_time(t: BlockHeight, acquired_block: BlockHeight) -> int:
    # parcels received at the sample block count as one block old
    return max(1, t - acquired_block)


def _velocity_from_terms(terms: Iterable[float]) -> float:
    # rounding of the individual terms can overshoot the exact sum by an ulp
    return min(1.0, math.fsum(terms))


class LedgerState:
    """
    Replay state of every account, optionally sharded by address.

    Accounts in `excluded` (zero and burning address by default) keep their
    parcels for conservation accounting but never enter velocity sums.
    """

    def __init__(self, shard_count: int = 1, excluded: Iterable[AccountId] = DEFAULT_EXCLUDED):
        if shard_count < 1:
            raise ValueError(f"shard_count must be >= 1, got {shard_count}")
        self.shard_count = shard_count
        self.excluded = frozenset(excluded)
        self.current_block: Optional[BlockHeight] = None
        self.minted: TokenAmount = 0
        self.applied = 0
        self._shards: List[Dict[AccountId, AccountState]] = [{} for _ in range(shard_count)]
        # acquisition block -> amount held by velocity-eligible accounts
        self._age_book: Dict[BlockHeight, TokenAmount] = defaultdict(int)
        self._eligible_money: TokenAmount = 0

    def _shard(self, account: AccountId) -> Dict[AccountId, AccountState]:
        if self.shard_count == 1:
            return self._shards[0]
        return self._shards[int(account[-8:], 16) % self.shard_count]

    def account(self, account: AccountId) -> Optional[AccountState]:
        return self._shard(account).get(account)

    def balance(self, account: AccountId) -> TokenAmount:
        state = self.account(account)
        return state.balance if state else 0

    def parcels(self, account: AccountId) -> List[Tuple[BlockHeight, TokenAmount]]:
        state = self.account(account)
        return state.snapshot() if state else []

    def is_eligible(self, account: AccountId) -> bool:
        return account not in self.excluded

    def accounts(self, include_excluded: bool = False) -> Iterator[Tuple[AccountId, AccountState]]:
        """Accounts with a positive balance in ascending address order."""
        merged = {}
        for shard in self._shards:
            merged.update(shard)
        for account in sorted(merged):
            state = merged[account]
            if state.balance and (include_excluded or self.is_eligible(account)):
                yield account, state

    def balances(self, include_excluded: bool = True) -> Dict[AccountId, TokenAmount]:
        return {a: s.balance for a, s in self.accounts(include_excluded)}

    def total_balance(self) -> TokenAmount:
        return sum(s.balance for shard in self._shards for s in shard.values())

    @property
    def eligible_money(self) -> TokenAmount:
        return self._eligible_money

    def apply_transfer(self, r: TransferRecord) -> "LedgerState":
        """Apply one record under the LIFO spending rule."""
        if self.current_block is not None and r.block < self.current_block:
            raise NonMonotonicBlock(f"record at block {r.block} after block {self.current_block}")
        moves = r.value != 0 and r.from_address != r.to_address
        sender = None
        if moves and r.from_address != ZERO_ADDRESS:
            sender_shard = self._shard(r.from_address)
            sender = sender_shard.get(r.from_address)
            if sender is None or sender.balance < r.value:
                held = sender.balance if sender else 0
                raise InsufficientBalance(
                    f"{r.from_address} sends {r.value} at {r.key} holding only {held}"
                )
        self.current_block = r.block
        self.applied += 1

        if not moves:
            return self

        if sender is None:
            self.minted += r.value
        else:
            consumed = sender.spend(r.value)
            if self.is_eligible(r.from_address):
                book = self._age_book
                for block, amount in consumed:
                    book[block] -= amount
                    if not book[block]:
                        del book[block]
                self._eligible_money -= r.value
            if not sender.balance:
                del sender_shard[r.from_address]

        recipient_shard = self._shard(r.to_address)
        recipient = recipient_shard.get(r.to_address)
        if recipient is None:
            recipient = recipient_shard[r.to_address] = AccountState()
        recipient.push(r.block, r.value)
        if self.is_eligible(r.to_address):
            self._age_book[r.block] += r.value
            self._eligible_money += r.value
        return self

    def apply_all(self, records: Iterable[TransferRecord]) -> "LedgerState":
        for record in records:
            self.apply_transfer(record)
        return self

    def check_sample_block(self, t: BlockHeight) -> None:
        if self.current_block is not None and t < self.current_block:
            raise NonMonotonicBlock(
                f"cannot sample block {t}: records up to block {self.current_block} already applied"
            )

    def age_book(self) -> Dict[BlockHeight, TokenAmount]:
        return dict(self._age_book)

    def iter_age_book(self) -> Iterator[Tuple[BlockHeight, TokenAmount]]:
        return iter(self._age_book.items())


def apply_transfer(state: LedgerState, r: TransferRecord) -> LedgerState:
    return state.apply_transfer(r)


def replay(
    records: Iterable[TransferRecord],
    until: Optional[BlockHeight] = None,
    shard_count: int = 1,
    excluded: Iterable[AccountId] = DEFAULT_EXCLUDED,
) -> LedgerState:
    """Replay every record with block <= `until` (all records when `until` is None)."""
    state = LedgerState(shard_count=shard_count, excluded=excluded)
    for record in records:
        if until is not None and record.block > until:
            break
        state.apply_transfer(record)
    return state


def holding_distribution(state: LedgerState, a: AccountId, t: BlockHeight) -> HoldingDistribution:
    state.check_sample_block(t)
    account = state.account(a)
    if account is None or not account.balance:
        raise EmptyAccount(f"{a} holds nothing at block {t}")
    entries: Dict[int, TokenAmount] = defaultdict(int)
    for parcel in account.parcels:
        entries[_holding_time(t, parcel.acquired_block)] += parcel.amount
    return HoldingDistribution(owner=a, at_block=t, entries=dict(sorted(entries.items())))


def micro_velocity(state: LedgerState, a: AccountId, t: BlockHeight) -> VelocitySample:
    """V_i(t) = sum over tau of (1/tau) * w(tau) / M_i(t)."""
    distribution = holding_distribution(state, a, t)
    money = distribution.money
    velocity = _velocity_from_terms(
        w / (tau * money) for tau, w in distribution.entries.items()
    )
    return VelocitySample(at_block=t, scope=a, velocity=velocity, money=money)


def global_velocity(state: LedgerState, t: BlockHeight) -> VelocitySample:
    """V(t) = sum_i M_i V_i / M, evaluated from the pooled age book of eligible accounts."""
    state.check_sample_block(t)
    money = state.eligible_money
    if money == 0:
        raise ZeroSupply(f"no velocity-eligible money at block {t}")
    velocity = _velocity_from_terms(
        w / (_holding_time(t, block) * money) for block, w in state.iter_age_book()
    )
    return VelocitySample(at_block=t, scope=GLOBAL_SCOPE, velocity=velocity, money=money)


def _check_schedule(schedule: Sequence[BlockHeight]) -> None:
    for previous, current in zip(schedule, schedule[1:]):
        if current <= previous:
            raise UnorderedInput(f"schedule must be strictly ascending ({previous} then {current})")


def iter_states(
    records: Iterable[TransferRecord],
    schedule: Sequence[BlockHeight],
    shard_count: int = 1,
    excluded: Iterable[AccountId] = DEFAULT_EXCLUDED,
) -> Iterator[Tuple[BlockHeight, LedgerState]]:
    """Single forward replay yielding the live state at each scheduled block.

    The yielded state is the same object every time and is only valid until
    the iterator is advanced.
    """
    _check_schedule(schedule)
    state = LedgerState(shard_count=shard_count, excluded=excluded)
    iterator = iter(records)
    pending: Optional[TransferRecord] = next(iterator, None)
    for t in schedule:
        while pending is not None and pending.block <= t:
            state.apply_transfer(pending)
            pending = next(iterator, None)
        yield t, state


def sample_series(
    ledger: Iterable[TransferRecord],
    schedule: Sequence[BlockHeight],
    scope: Union[Scope, str] = Scope.GLOBAL,
    accounts: Optional[Iterable[AccountId]] = None,
    shard_count: int = 1,
    window: Optional[int] = None,
    window_stride: Optional[int] = None,
    excluded: Iterable[AccountId] = DEFAULT_EXCLUDED,
) -> List[VelocitySample]:
    """
    Replay the ledger once and sample velocities at each scheduled block.

    Args:
        ledger: Records sorted by (block, log_index)
        schedule: Strictly ascending sample blocks
        scope: "global", "accounts" or "all"
        accounts: Restrict per-account samples to these addresses
        shard_count: Number of account shards used during replay
        window: Optional averaging window in blocks (see window_average)
        window_stride: Distance between window starts, defaults to the width
        excluded: Addresses left out of every velocity sum

    Returns:
        Samples ordered by block, global sample first, then accounts by address
    """
    scope = Scope(scope)
    wanted = sorted(set(accounts)) if accounts is not None else None
    samples: List[VelocitySample] = []

    for t, state in iter_states(ledger, schedule, shard_count, excluded):
        if scope in (Scope.GLOBAL, Scope.ALL):
            if state.eligible_money:
                samples.append(global_velocity(state, t))
            else:
                logger.debug(f"Skipping global sample at block {t}: no eligible supply")
        if scope in (Scope.ACCOUNTS, Scope.ALL):
            if wanted is None:
                candidates = [a for a, _ in state.accounts()]
            else:
                candidates = [a for a in wanted if state.balance(a) and state.is_eligible(a)]
            for a in candidates:
                samples.append(micro_velocity(state, a, t))

    if window:
        return window_average(samples, window, window_stride)
    return samples


def window_average(
    samples: Sequence[VelocitySample],
    width: int = WEEK_BLOCKS,
    stride: Optional[int] = None,
) -> List[VelocitySample]:
    """
    Mean velocity per scope over windows [origin + k*stride, origin + k*stride + width).

    The origin is the first sample block. Each output sample is placed at its
    window start and carries the money of the last sample inside the window.
    """
    if width <= 0:
        raise ValueError(f"window width must be positive, got {width}")
    stride = stride or width
    if stride <= 0:
        raise ValueError(f"window stride must be positive, got {stride}")
    if not samples:
        return []

    origin = min(s.at_block for s in samples)
    velocities: Dict[Tuple[int, str], List[float]] = defaultdict(list)
    last: Dict[Tuple[int, str], VelocitySample] = {}
    for sample in samples:
        offset = sample.at_block - origin
        k_max = offset // stride
        k_min = max(0, -((width - 1 - offset) // stride))
        for k in range(k_min, k_max + 1):
            key = (k, sample.scope)
            velocities[key].append(sample.velocity)
            if key not in last or sample.at_block >= last[key].at_block:
                last[key] = sample

    def order(key: Tuple[int, str]):
        k, scope = key
        return (k, scope != GLOBAL_SCOPE, scope)

    averaged = []
    for key in sorted(velocities, key=order):
        k, scope = key
        values = velocities[key]
        averaged.append(VelocitySample(
            at_block=origin + k * stride,
            scope=scope,
            velocity=math.fsum(values) / len(values),
            money=last[key].money,
        ))
    return averaged
