from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
import logging
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from baseline.errors import InvalidCategoryTable, MissingTimeIndex, ZeroSupply
from baseline.ledger.ledger import (
    BURN_ADDRESS,
    WEI,
    ZERO_ADDRESS,
    AccountId,
    BlockHeight,
    TokenAmount,
    TransferRecord,
)
from baseline.velocity.velocity import DEFAULT_EXCLUDED, LedgerState, iter_states, replay

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86_400
DEFAULT_SECONDS_PER_BLOCK = 12

# Known DeFi holders of wstETH, shown next to top-holder output
DEFAULT_LABELS: Dict[AccountId, str] = {
    "0x0b925ed163218f6662a35e0f0371ac234f9e9371": "Aave Ethereum wstETH",
    "0x12b54025c112aa61face2cdb7118740875a566e9": "Spark: wstETH",
    "0x248ccbf4864221fc0e840f29bb042ad5bfc89b5c": "SkyMoney: MCD Join wstETH 2",
    "0x10cd5fbe1b404b7e19ef964b63939907bdaf42e2": "SkyMoney: MCD Join wstETH",
    "0xba12222222228d8ba445958a75a0704d566bf2c8": "Balancer Vault",
}


@dataclass(frozen=True)
class CategoryBand:
    name: str
    lower: Fraction
    upper: Optional[Fraction] = None  # None means unbounded

    def contains(self, tokens: Fraction) -> bool:
        return tokens >= self.lower and (self.upper is None or tokens < self.upper)


class CategoryTable:
    """Received-amount bands in whole tokens, lower bound inclusive, upper exclusive."""

    def __init__(self, bands: Sequence[CategoryBand]):
        self.bands: Tuple[CategoryBand, ...] = tuple(sorted(bands, key=lambda b: b.lower, reverse=True))
        self._validate()

    def _validate(self) -> None:
        if not self.bands:
            raise InvalidCategoryTable("category table is empty")
        names = [b.name for b in self.bands]
        if len(set(names)) != len(names):
            raise InvalidCategoryTable(f"duplicate category names in {names}")
        if self.bands[0].upper is not None:
            raise InvalidCategoryTable(f"top band {self.bands[0].name} must be unbounded")
        if self.bands[-1].lower != 0:
            raise InvalidCategoryTable(f"bottom band {self.bands[-1].name} must start at 0")
        for higher, lower in zip(self.bands, self.bands[1:]):
            if lower.upper != higher.lower:
                raise InvalidCategoryTable(
                    f"bands {lower.name} and {higher.name} leave a gap or overlap"
                )

    @classmethod
    def default(cls) -> "CategoryTable":
        return cls([
            CategoryBand("Whale", Fraction(10_000)),
            CategoryBand("Orca", Fraction(3_000), Fraction(10_000)),
            CategoryBand("Dolphin", Fraction(1_000), Fraction(3_000)),
            CategoryBand("Fish", Fraction(100), Fraction(1_000)),
            CategoryBand("Shrimp", Fraction(10), Fraction(100)),
            CategoryBand("Krill", Fraction(1), Fraction(10)),
            CategoryBand("Plankton", Fraction(0), Fraction(1)),
        ])

    @property
    def names(self) -> List[str]:
        return [b.name for b in self.bands]

    def categorize(self, received: TokenAmount) -> str:
        tokens = Fraction(received, WEI)
        for band in self.bands:
            if band.contains(tokens):
                return band.name
        raise InvalidCategoryTable(f"no band contains {tokens}")


def categorize(received: TokenAmount, table: Optional[CategoryTable] = None) -> str:
    return (table or CategoryTable.default()).categorize(received)


def received_totals(ledger: Iterable[TransferRecord]) -> Dict[AccountId, TokenAmount]:
    """Total received per account over the whole ledger; self-transfers do not count."""
    totals: Dict[AccountId, TokenAmount] = defaultdict(int)
    for r in ledger:
        if r.from_address != r.to_address:
            totals[r.to_address] += r.value
    return dict(totals)


def total_received(ledger: Iterable[TransferRecord], a: AccountId) -> TokenAmount:
    return sum(r.value for r in ledger if r.to_address == a and r.from_address != a)


@dataclass(frozen=True)
class CategorySummary:
    name: str
    total_received: TokenAmount
    count: int


def category_summary(
    ledger: Iterable[TransferRecord],
    table: Optional[CategoryTable] = None,
    excluded: Iterable[AccountId] = DEFAULT_EXCLUDED,
) -> List[CategorySummary]:
    """Per band: how much its accounts received and how many accounts it holds."""
    table = table or CategoryTable.default()
    excluded = set(excluded)
    totals = {name: 0 for name in table.names}
    counts = {name: 0 for name in table.names}
    for account, received in received_totals(ledger).items():
        if account in excluded:
            continue
        name = table.categorize(received)
        totals[name] += received
        counts[name] += 1
    return [CategorySummary(name, totals[name], counts[name]) for name in table.names]


@dataclass(frozen=True)
class CategoryShares:
    at_block: BlockHeight
    shares: Dict[str, float]


def _weighted_velocity_terms(state: LedgerState, t: BlockHeight) -> Dict[AccountId, List[float]]:
    # M_i * V_i = sum over parcels of amount / tau
    terms = {}
    for account, account_state in state.accounts():
        terms[account] = [
            p.amount / max(1, t - p.acquired_block) for p in account_state.parcels
        ]
    return terms


def velocity_shares_by_category(
    ledger: Iterable[TransferRecord],
    schedule: Sequence[BlockHeight],
    table: Optional[CategoryTable] = None,
    received: Optional[Mapping[AccountId, TokenAmount]] = None,
    shard_count: int = 1,
    excluded: Iterable[AccountId] = DEFAULT_EXCLUDED,
) -> List[CategoryShares]:
    """
    Share of sum_i M_i V_i contributed by each category at every sample block.

    Categories are fixed once from total received over the whole ledger. Pass
    `received` to categorize by another ledger (e.g. token-denominated amounts
    while the velocity runs on shares).
    """
    table = table or CategoryTable.default()
    records = list(ledger)
    received = received if received is not None else received_totals(records)
    category_of: Dict[AccountId, str] = {}

    results = []
    for t, state in iter_states(records, schedule, shard_count, excluded):
        by_category: Dict[str, List[float]] = {name: [] for name in table.names}
        for account, terms in _weighted_velocity_terms(state, t).items():
            if account not in category_of:
                category_of[account] = table.categorize(received.get(account, 0))
            by_category[category_of[account]].extend(terms)
        total = math.fsum(term for terms in by_category.values() for term in terms)
        if total == 0:
            logger.debug(f"Skipping category shares at block {t}: no eligible supply")
            continue
        results.append(CategoryShares(
            at_block=t,
            shares={name: math.fsum(terms) / total for name, terms in by_category.items()},
        ))
    return results


class BlockTimeIndex:
    """Block -> unix timestamp, from explicit rows or an affine approximation."""

    def __init__(
        self,
        timestamps: Optional[Mapping[BlockHeight, int]] = None,
        genesis_block: int = 0,
        genesis_timestamp: int = 0,
        seconds_per_block: float = DEFAULT_SECONDS_PER_BLOCK,
    ):
        if seconds_per_block <= 0:
            raise ValueError(f"seconds_per_block must be positive, got {seconds_per_block}")
        self.genesis_block = genesis_block
        self.genesis_timestamp = genesis_timestamp
        self.seconds_per_block = seconds_per_block
        self._blocks: List[int] = []
        self._times: List[int] = []
        if timestamps:
            for block in sorted(timestamps):
                if self._times and timestamps[block] < self._times[-1]:
                    raise MissingTimeIndex(f"timestamps decrease at block {block}")
                self._blocks.append(block)
                self._times.append(timestamps[block])

    @property
    def is_explicit(self) -> bool:
        return bool(self._blocks)

    def timestamp(self, block: BlockHeight) -> float:
        if self.is_explicit:
            position = bisect_right(self._blocks, block)
            if position == 0:
                raise MissingTimeIndex(f"time index starts after block {block}")
            return float(self._times[position - 1])
        return self.genesis_timestamp + (block - self.genesis_block) * self.seconds_per_block

    def blocks_for_days(self, days: float) -> int:
        return int(round(days * SECONDS_PER_DAY / self.seconds_per_block))


def smooth(
    points: Sequence[Tuple[BlockHeight, float]],
    days: float,
    time_index: BlockTimeIndex,
) -> List[Tuple[BlockHeight, float]]:
    """Mean of the raw samples whose timestamp lies in [t - days, t]."""
    if not points:
        return []
    index = pd.to_datetime([time_index.timestamp(block) for block, _ in points], unit="s")
    series = pd.Series([float(value) for _, value in points], index=index)
    rolled = series.rolling(pd.Timedelta(days=days), closed="both").mean()
    return [(block, float(value)) for (block, _), value in zip(points, rolled.tolist())]


@dataclass
class BalanceSeries:
    account: AccountId
    points: List[Tuple[BlockHeight, TokenAmount]] = field(default_factory=list)
    smoothed: Optional[List[Tuple[BlockHeight, float]]] = None
    window_days: Optional[float] = None
    label: Optional[str] = None


def balance_series(
    ledger: Iterable[TransferRecord],
    accounts: Iterable[AccountId],
    schedule: Sequence[BlockHeight],
    smoothing_days: Optional[float] = None,
    time_index: Optional[BlockTimeIndex] = None,
    labels: Optional[Mapping[AccountId, str]] = None,
) -> List[BalanceSeries]:
    """Exact balances of each account at every sample block, optionally smoothed over days."""
    accounts = list(dict.fromkeys(accounts))
    if smoothing_days and time_index is None:
        raise MissingTimeIndex("day-based smoothing needs a time index or affine parameters")
    if not accounts:
        return []

    series = {a: BalanceSeries(account=a, label=(labels or {}).get(a)) for a in accounts}
    for t, state in iter_states(ledger, schedule, excluded=()):
        for a in accounts:
            series[a].points.append((t, state.balance(a)))

    if smoothing_days:
        for item in series.values():
            item.smoothed = smooth(item.points, smoothing_days, time_index)
            item.window_days = smoothing_days
    return [series[a] for a in accounts]


def top_holders(
    ledger: Iterable[TransferRecord],
    t: BlockHeight,
    n: int,
    exclude: Iterable[AccountId] = (),
) -> List[Tuple[AccountId, TokenAmount]]:
    """The n largest balances at block t, ties broken by ascending address."""
    if n <= 0:
        return []
    skip = set(exclude) | {ZERO_ADDRESS, BURN_ADDRESS}
    state = replay(ledger, until=t, excluded=())
    holders = [(a, s.balance) for a, s in state.accounts(include_excluded=True) if a not in skip]
    holders.sort(key=lambda item: (-item[1], item[0]))
    return holders[:n]


@dataclass(frozen=True)
class WrappedSharePoint:
    at_block: BlockHeight
    fraction: float
    smoothed: Optional[float] = None


def wrapped_share(state: LedgerState, wsteth_contract: AccountId, burn_address: AccountId = BURN_ADDRESS) -> float:
    """Fraction of supply (minted minus the burning address's balance) held by the wrapper contract."""
    supply = state.minted - state.balance(burn_address)
    if supply <= 0:
        raise ZeroSupply("no circulating supply")
    return float(Fraction(state.balance(wsteth_contract), supply))


def wrapped_share_series(
    steth_ledger: Iterable[TransferRecord],
    wsteth_contract: AccountId,
    schedule: Sequence[BlockHeight],
    smoothing_days: Optional[float] = None,
    time_index: Optional[BlockTimeIndex] = None,
    burn_address: AccountId = BURN_ADDRESS,
) -> List[WrappedSharePoint]:
    if smoothing_days and time_index is None:
        raise MissingTimeIndex("day-based smoothing needs a time index or affine parameters")
    raw: List[Tuple[BlockHeight, float]] = []
    for t, state in iter_states(steth_ledger, schedule, excluded=()):
        if state.minted - state.balance(burn_address) <= 0:
            logger.debug(f"Skipping wrapped share at block {t}: no supply")
            continue
        raw.append((t, wrapped_share(state, wsteth_contract, burn_address)))

    if not smoothing_days:
        return [WrappedSharePoint(t, value) for t, value in raw]
    smoothed = smooth(raw, smoothing_days, time_index)
    return [
        WrappedSharePoint(t, value, mean)
        for (t, value), (_, mean) in zip(raw, smoothed)
    ]
