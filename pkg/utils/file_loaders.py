from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import pandas as pd

from baseline.errors import InvalidAddress, InvalidAmount, InvalidCategoryTable, ParseError
from baseline.ledger.ledger import (
    MAX_UINT256,
    Denomination,
    LidoStateSnapshot,
    TransferRecord,
    make_transfer,
    normalize_address,
    sort_records,
)
from baseline.shares.shares import StateSeries
from specialization.decomposition import BlockTimeIndex, CategoryBand, CategoryTable
from utils.utils import format_cell

PathLike = Union[str, Path]

TRANSFER_COLUMNS = ["block_number", "log_index", "tx_hash", "from_address", "to_address", "value"]
STATE_COLUMNS = [
    "block_number",
    "deposited_validators",
    "beacon_validators",
    "beacon_balance",
    "buffered_ether",
    "total_shares",
]
TIME_INDEX_COLUMNS = ["block_number", "timestamp"]
LABEL_COLUMNS = ["address", "label"]
CATEGORY_COLUMNS = ["name", "lower", "upper"]


@dataclass(frozen=True)
class TransferCsvRow:
    block_number: int
    log_index: int
    tx_hash: str
    from_address: str
    to_address: str
    value: int

    def cells(self) -> List[str]:
        return [str(self.block_number), str(self.log_index), self.tx_hash,
                self.from_address, self.to_address, str(self.value)]

    def to_record(self, denomination: Denomination) -> TransferRecord:
        return make_transfer(self.block_number, self.log_index, self.from_address,
                             self.to_address, self.value, denomination, self.tx_hash or None)


@dataclass(frozen=True)
class StateCsvRow:
    block_number: int
    deposited_validators: int
    beacon_validators: int
    beacon_balance: int
    buffered_ether: int
    total_shares: int

    def cells(self) -> List[str]:
        return [str(v) for v in (self.block_number, self.deposited_validators, self.beacon_validators,
                                 self.beacon_balance, self.buffered_ether, self.total_shares)]

    def to_snapshot(self) -> LidoStateSnapshot:
        return LidoStateSnapshot(
            block=self.block_number,
            deposited_validators=self.deposited_validators,
            beacon_validators=self.beacon_validators,
            beacon_balance=self.beacon_balance,
            buffered_ether=self.buffered_ether,
            total_shares=self.total_shares,
        )


def _read_table(
    path: PathLike,
    required: Sequence[str],
    column_map: Optional[Mapping[str, str]] = None,
) -> pd.DataFrame:
    """Read a CSV (gzip inferred from the extension) as strings and check its header."""
    path = Path(path)
    if not path.exists():
        raise ParseError("file not found", path=str(path))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, compression="infer")
    except pd.errors.EmptyDataError:
        raise ParseError("missing header row", line=1, path=str(path))
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(str(e), path=str(path))
    if column_map:
        frame = frame.rename(columns=dict(column_map))
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", line=1, path=str(path))
    return frame


def _parse_uint(text: str, column: str, line: int, path: str, maximum: int = MAX_UINT256) -> int:
    text = text.strip()
    if not text.isdecimal():
        raise ParseError(f"{column} is not an unsigned decimal: {text!r}", line=line, path=path)
    value = int(text)
    if value > maximum:
        raise ParseError(f"{column} {value} exceeds {maximum}", line=line, path=path)
    return value


def load_transfers(
    path: PathLike,
    denomination: Denomination = Denomination.TOKENS,
    column_map: Optional[Mapping[str, str]] = None,
) -> List[TransferRecord]:
    """
    Load transfer rows and return them sorted by (block, log_index).

    Args:
        path: CSV or CSV.GZ file with the transfer header
        denomination: Denomination of the value column
        column_map: Optional renaming from the file's columns to the canonical ones

    Returns:
        Sorted list of TransferRecord
    """
    required = [c for c in TRANSFER_COLUMNS if c != "tx_hash"]
    frame = _read_table(path, required, column_map)
    has_hash = "tx_hash" in frame.columns
    source = str(path)

    records = []
    columns = [frame[c].tolist() for c in required]
    hashes = frame["tx_hash"].tolist() if has_hash else [""] * len(frame)
    for offset, (block, log_index, sender, recipient, value) in enumerate(zip(*columns)):
        line = offset + 2
        try:
            records.append(make_transfer(
                _parse_uint(block, "block_number", line, source, 2**64 - 1),
                _parse_uint(log_index, "log_index", line, source),
                sender,
                recipient,
                _parse_uint(value, "value", line, source),
                denomination,
                hashes[offset].strip() or None,
            ))
        except (InvalidAddress, InvalidAmount) as e:
            raise ParseError(str(e), line=line, path=source)
    return sort_records(records)


def write_transfers(
    path: PathLike,
    records: Iterable[TransferRecord],
    extra: Optional[Mapping[str, Sequence[str]]] = None,
) -> Path:
    """Write records with the canonical header; `extra` appends columns such as provenance."""
    rows = [
        [str(r.block), str(r.log_index), r.tx_hash or "", r.from_address, r.to_address, str(r.value)]
        for r in records
    ]
    columns = list(TRANSFER_COLUMNS)
    if extra:
        for name, values in extra.items():
            columns.append(name)
            for row, value in zip(rows, values):
                row.append(value)
    return write_rows(path, columns, rows)


def load_states(path: PathLike, column_map: Optional[Mapping[str, str]] = None) -> StateSeries:
    """Load state rows; a repeated block keeps its last occurrence."""
    frame = _read_table(path, STATE_COLUMNS, column_map)
    source = str(path)
    by_block: Dict[int, LidoStateSnapshot] = {}
    for offset, values in enumerate(zip(*(frame[c].tolist() for c in STATE_COLUMNS))):
        line = offset + 2
        parsed = [_parse_uint(v, c, line, source) for v, c in zip(values, STATE_COLUMNS)]
        row = StateCsvRow(*parsed)
        by_block[row.block_number] = row.to_snapshot()
    return StateSeries(by_block.values())


def write_states(path: PathLike, states: Iterable[LidoStateSnapshot]) -> Path:
    rows = [
        [s.block, s.deposited_validators, s.beacon_validators, s.beacon_balance, s.buffered_ether, s.total_shares]
        for s in states
    ]
    return write_rows(path, STATE_COLUMNS, rows)


def load_time_index(
    path: PathLike,
    seconds_per_block: float = 12,
) -> BlockTimeIndex:
    frame = _read_table(path, TIME_INDEX_COLUMNS)
    source = str(path)
    timestamps = {}
    for offset, (block, stamp) in enumerate(zip(frame["block_number"].tolist(), frame["timestamp"].tolist())):
        line = offset + 2
        timestamps[_parse_uint(block, "block_number", line, source)] = _parse_uint(stamp, "timestamp", line, source)
    return BlockTimeIndex(timestamps=timestamps, seconds_per_block=seconds_per_block)


def load_labels(path: PathLike) -> Tuple[Dict[str, str], Set[str]]:
    """address,label[,exclude] rows -> (labels, addresses flagged for exclusion)."""
    frame = _read_table(path, LABEL_COLUMNS)
    source = str(path)
    flags = frame["exclude"].tolist() if "exclude" in frame.columns else [""] * len(frame)
    labels: Dict[str, str] = {}
    excluded: Set[str] = set()
    for offset, (address, label) in enumerate(zip(frame["address"].tolist(), frame["label"].tolist())):
        try:
            account = normalize_address(address)
        except InvalidAddress as e:
            raise ParseError(str(e), line=offset + 2, path=source)
        labels[account] = label.strip()
        if flags[offset].strip().lower() in ("1", "true", "yes"):
            excluded.add(account)
    return labels, excluded


def load_category_table(path: PathLike) -> CategoryTable:
    """name,lower,upper in whole tokens; an empty upper bound means unbounded."""
    frame = _read_table(path, CATEGORY_COLUMNS)
    source = str(path)
    bands = []
    for offset, (name, lower, upper) in enumerate(zip(*(frame[c].tolist() for c in CATEGORY_COLUMNS))):
        try:
            bands.append(CategoryBand(
                name=name.strip(),
                lower=Fraction(lower.strip()),
                upper=Fraction(upper.strip()) if upper.strip() else None,
            ))
        except (ValueError, ZeroDivisionError) as e:
            raise ParseError(f"bad band bounds: {e}", line=offset + 2, path=source)
    try:
        return CategoryTable(bands)
    except InvalidCategoryTable as e:
        raise ParseError(str(e), path=source)


def write_rows(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write rows as CSV; integers in full decimal, reals positional, None as an empty cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([[format_cell(v) for v in row] for row in rows], columns=list(columns), dtype=object)
    frame.to_csv(path, index=False, lineterminator="\n", compression="infer")
    return path


def append_rows(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Append rows, writing the header only when the file does not exist yet."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([[format_cell(v) for v in row] for row in rows], columns=list(columns), dtype=object)
    frame.to_csv(path, mode="a", header=not path.exists(), index=False, lineterminator="\n", compression="infer")
    return path


def truncate_after_block(path: PathLike, columns: Sequence[str], last_block: Optional[int]) -> None:
    """Drop rows past `last_block` from a partially written export (all rows when it is None)."""
    path = Path(path)
    if not path.exists():
        return
    frame = _read_table(path, columns)
    if last_block is None:
        kept = frame.iloc[0:0]
    else:
        kept = frame[frame["block_number"].map(int) <= last_block]
    if len(kept) != len(frame):
        kept[list(columns)].to_csv(path, index=False, lineterminator="\n", compression="infer")
