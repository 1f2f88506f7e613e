from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal, localcontext
from enum import Enum
from itertools import accumulate
import logging
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from baseline.errors import DuplicateKey, LedgerError, MissingState, ZeroPool, ZeroShares
from baseline.ledger.ledger import (
    BlockHeight,
    Denomination,
    LidoStateSnapshot,
    TokenAmount,
    TransferRecord,
    check_ordered,
    mul_div,
    total_pooled_ether,
)
from utils.chunkers import BlockChunker

logger = logging.getLogger(__name__)

# significant digits used when rendering the conversion rate
RATE_PRECISION = 40


class Provenance(str, Enum):
    NATIVE_EVENT = "native"
    RECONSTRUCTED = "reconstructed"


class StateSeries:
    """Lido snapshots keyed by block with step-function lookup."""

    def __init__(self, snapshots: Iterable[LidoStateSnapshot] = ()):
        ordered = sorted(snapshots, key=lambda s: s.block)
        for previous, current in zip(ordered, ordered[1:]):
            if previous.block == current.block:
                raise DuplicateKey(current.block, f"two snapshots for block {current.block}")
        self._snapshots: Tuple[LidoStateSnapshot, ...] = tuple(ordered)
        self._blocks: List[int] = [s.block for s in ordered]

    def __len__(self) -> int:
        return len(self._snapshots)

    def __iter__(self) -> Iterator[LidoStateSnapshot]:
        return iter(self._snapshots)

    @property
    def snapshots(self) -> Tuple[LidoStateSnapshot, ...]:
        return self._snapshots

    @property
    def first_block(self) -> Optional[int]:
        return self._blocks[0] if self._blocks else None

    @property
    def last_block(self) -> Optional[int]:
        return self._blocks[-1] if self._blocks else None

    def lookup(self, block: BlockHeight) -> LidoStateSnapshot:
        """Snapshot with the greatest block <= `block`."""
        position = bisect_right(self._blocks, block)
        if position == 0:
            raise MissingState(f"no state snapshot at or before block {block}")
        return self._snapshots[position - 1]


@dataclass(frozen=True)
class ShareLedger:
    """Canonical share-denominated transfer history."""

    transfers: Tuple[TransferRecord, ...] = ()
    provenance: Tuple[Provenance, ...] = ()
    cutover_block: Optional[int] = None

    def __post_init__(self):
        if len(self.transfers) != len(self.provenance):
            raise ValueError("every transfer needs exactly one provenance entry")

    def __len__(self) -> int:
        return len(self.transfers)

    def __iter__(self) -> Iterator[TransferRecord]:
        return iter(self.transfers)

    def records(self) -> List[TransferRecord]:
        return list(self.transfers)

    def with_provenance(self) -> Iterator[Tuple[TransferRecord, Provenance]]:
        return zip(self.transfers, self.provenance)

    def count(self, provenance: Provenance) -> int:
        return sum(1 for p in self.provenance if p is provenance)


def tokens_to_shares(amount: TokenAmount, s: LidoStateSnapshot) -> TokenAmount:
    """getSharesByPooledEth: floor(amount * total_shares / total_pooled_ether)."""
    pooled = total_pooled_ether(s)
    if pooled == 0:
        raise ZeroPool(f"block {s.block}: total pooled ether is zero")
    return mul_div(amount, s.total_shares, pooled)


def shares_to_tokens(shares: TokenAmount, s: LidoStateSnapshot) -> TokenAmount:
    """getPooledEthByShares: floor(shares * total_pooled_ether / total_shares)."""
    if s.total_shares == 0:
        raise ZeroShares(f"block {s.block}: total_shares is zero")
    return mul_div(shares, total_pooled_ether(s), s.total_shares)


def _convert_chunk(chunk: Sequence[TransferRecord], states: StateSeries) -> List[TransferRecord]:
    converted = []
    for record in chunk:
        snapshot = states.lookup(record.block)
        try:
            shares = tokens_to_shares(record.value, snapshot)
        except ZeroPool as e:
            raise ZeroPool(
                f"token transfer at {record.key} precedes the first deposit ({e})"
            ) from e
        converted.append(record.converted(shares, Denomination.SHARES))
    return converted


def reconstruct(
    token_transfers: Sequence[TransferRecord],
    native_share_transfers: Sequence[TransferRecord],
    states: StateSeries,
    workers: int = 1,
    chunk_size: int = 50_000,
) -> ShareLedger:
    """
    Merge token-denominated transfers from before the first native TransferShares
    block with the native share records from that block on.

    Args:
        token_transfers: Transfer events, sorted by (block, log_index)
        native_share_transfers: TransferShares events, sorted
        states: Snapshot series covering every pre-cutover transfer block
        workers: Threads used to convert pre-cutover chunks
        chunk_size: Records per conversion chunk

    Returns:
        ShareLedger with one provenance entry per record
    """
    check_ordered(token_transfers, "token transfers")
    check_ordered(native_share_transfers, "native share transfers")
    if any(r.denomination is not Denomination.SHARES for r in native_share_transfers):
        raise LedgerError("native share transfers must be share-denominated")

    cutover = native_share_transfers[0].block if native_share_transfers else None
    if cutover is None:
        pre_cutover = list(token_transfers)
    else:
        split = bisect_left([r.block for r in token_transfers], cutover)
        pre_cutover = list(token_transfers[:split])
        dropped = len(token_transfers) - split
        if dropped:
            logger.info(f"Dropping {dropped} token records at or after cutover block {cutover}")

    chunks = BlockChunker.chunk_records(pre_cutover, chunk_size)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            converted_chunks = list(executor.map(lambda c: _convert_chunk(c, states), chunks))
    else:
        converted_chunks = [_convert_chunk(c, states) for c in chunks]

    transfers: List[TransferRecord] = [r for chunk in converted_chunks for r in chunk]
    provenance = [Provenance.RECONSTRUCTED] * len(transfers)
    transfers.extend(native_share_transfers)
    provenance.extend([Provenance.NATIVE_EVENT] * len(native_share_transfers))

    logger.info(
        f"Reconstructed {len(pre_cutover)} records, kept {len(native_share_transfers)} native records"
    )
    return ShareLedger(tuple(transfers), tuple(provenance), cutover)


@dataclass(frozen=True)
class SupplyPoint:
    block: BlockHeight
    total_shares: TokenAmount
    total_pooled_ether: TokenAmount
    conversion_rate: Optional[Decimal]
    ledger_minted_shares: TokenAmount


def conversion_rate(s: LidoStateSnapshot) -> Optional[Decimal]:
    """Shares per token as a decimal, or None before any ether is pooled."""
    pooled = total_pooled_ether(s)
    if pooled == 0:
        return None
    with localcontext() as ctx:
        ctx.prec = RATE_PRECISION
        return Decimal(s.total_shares) / Decimal(pooled)


def supply_series(
    states: StateSeries,
    share_ledger: Iterable[TransferRecord],
    sample_blocks: Iterable[BlockHeight],
) -> List[SupplyPoint]:
    """Total shares, total pooled ether and the token->share rate at each sample block."""
    mints = [(r.block, r.value) for r in share_ledger if r.is_mint]
    mint_blocks = [block for block, _ in mints]
    minted_running = list(accumulate(value for _, value in mints))

    points = []
    for block in sorted(sample_blocks):
        snapshot = states.lookup(block)
        position = bisect_right(mint_blocks, block)
        minted = minted_running[position - 1] if position else 0
        points.append(SupplyPoint(
            block=block,
            total_shares=snapshot.total_shares,
            total_pooled_ether=total_pooled_ether(snapshot),
            conversion_rate=conversion_rate(snapshot),
            ledger_minted_shares=minted,
        ))
    return points
