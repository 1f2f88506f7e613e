from pathlib import Path
from typing import List, Dict, Any, Optional, Sequence, Set, Tuple
import logging
import sys
import time

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from baseline.errors import LedgerError
from baseline.ledger.ledger import Denomination, TransferRecord, normalize_address
from baseline.shares.shares import Provenance, ShareLedger, StateSeries, reconstruct, supply_series
from baseline.velocity.velocity import DEFAULT_EXCLUDED, Scope, sample_series
from specialization.decomposition import (
    DEFAULT_LABELS,
    BlockTimeIndex,
    CategoryTable,
    balance_series,
    category_summary,
    received_totals,
    top_holders,
    velocity_shares_by_category,
    wrapped_share_series,
)
from utils.chunkers import BlockChunker
from utils.config import RunConfig, TokenKind
from utils.file_loaders import (
    load_category_table,
    load_labels,
    load_states,
    load_time_index,
    load_transfers,
    write_rows,
    write_transfers,
)
from utils.logger import RunLogger

logger = logging.getLogger(__name__)

VELOCITY_COLUMNS = ["block_number", "scope", "velocity", "money"]
CATEGORY_COLUMNS = ["address", "total_received", "category"]
SUMMARY_COLUMNS = ["category", "total_received", "count"]
BALANCE_COLUMNS = ["block_number", "address", "label", "balance", "smoothed"]
TOP_HOLDER_COLUMNS = ["rank", "address", "label", "balance"]
WRAPPED_COLUMNS = ["block_number", "fraction", "smoothed"]
SUPPLY_COLUMNS = ["block_number", "total_shares", "total_pooled_ether", "conversion_rate", "ledger_minted_shares"]


class VelocityPipeline:
    def __init__(self, config: RunConfig, log_prefix: str = ""):
        """
        Initialize the pipeline for one validated run configuration.

        Args:
            config (RunConfig): Paths, token kind, schedule and analysis options
            log_prefix (str): Prefix for the JSONL run log files
        """
        self.config = config
        self.logger = RunLogger(log_dir=str(config.log_dir), log_prefix=log_prefix)
        self.output_dir = Path(config.output_dir)
        self._ledger: Optional[ShareLedger] = None
        self._records: Optional[List[TransferRecord]] = None
        self._states: Optional[StateSeries] = None
        self._inputs: Dict[str, Any] = {}

    # ---- inputs ----

    def states(self) -> StateSeries:
        if self._states is None:
            self.config.require("states_path")
            self._states = load_states(self.config.states_path, self.config.column_map)
            self._inputs[str(self.config.states_path)] = len(self._states)
        return self._states

    def load_ledger(self) -> List[TransferRecord]:
        """Share ledger for stETH kinds, plain token ledger for wstETH."""
        if self._records is not None:
            return self._records
        config = self.config
        config.require("transfers_path")
        if config.token_kind is TokenKind.STETH_TOKENS:
            self._ledger = self.reconstruct_ledger()
            self._records = self._ledger.records()
        else:
            denomination = Denomination.SHARES if config.token_kind is TokenKind.STETH_SHARES else Denomination.TOKENS
            self._records = load_transfers(config.transfers_path, denomination, config.column_map)
            self._inputs[str(config.transfers_path)] = len(self._records)
        return self._records

    def reconstruct_ledger(self) -> ShareLedger:
        config = self.config
        config.require("transfers_path", "states_path")
        tokens = load_transfers(config.transfers_path, Denomination.TOKENS, config.column_map)
        self._inputs[str(config.transfers_path)] = len(tokens)
        native: List[TransferRecord] = []
        if config.shares_path is not None:
            native = load_transfers(config.shares_path, Denomination.SHARES, config.column_map)
            self._inputs[str(config.shares_path)] = len(native)
        return reconstruct(tokens, native, self.states(), workers=config.workers)

    def schedule(self, records: Optional[Sequence[TransferRecord]] = None) -> List[int]:
        """Sample blocks from the config, defaulting to the ledger's first and last block."""
        settings = self.config.schedule
        start, end = settings.start, settings.end
        if start is None or end is None:
            records = self.load_ledger() if records is None else records
            if not records:
                return []
            start = records[0].block if start is None else start
            end = records[-1].block if end is None else end
        return BlockChunker.sample_blocks(start, end, settings.stride)

    def time_index(self) -> BlockTimeIndex:
        settings = self.config.time_index
        if settings.path is not None:
            return load_time_index(settings.path, settings.seconds_per_block)
        return BlockTimeIndex(
            genesis_block=settings.genesis_block,
            genesis_timestamp=settings.genesis_timestamp,
            seconds_per_block=settings.seconds_per_block,
        )

    def category_table(self) -> CategoryTable:
        if self.config.category_table_path is None:
            return CategoryTable.default()
        return load_category_table(self.config.category_table_path)

    def labels(self) -> Tuple[Dict[str, str], Set[str]]:
        if self.config.labels_path is None:
            return dict(DEFAULT_LABELS), set()
        return load_labels(self.config.labels_path)

    def excluded(self) -> Set[str]:
        return set(DEFAULT_EXCLUDED) | set(self.config.exclude)

    def receipts(self, records: List[TransferRecord]) -> List[TransferRecord]:
        """Token-denominated ledger that categories are drawn from."""
        config = self.config
        if config.received_path is not None:
            path = config.received_path
        elif config.token_kind is TokenKind.STETH_TOKENS:
            path = config.transfers_path
        else:
            return records
        receipts = load_transfers(path, Denomination.TOKENS, config.column_map)
        self._inputs[str(path)] = len(receipts)
        return receipts

    # ---- commands ----

    def run_reconstruct(self, output: Optional[str] = None) -> Path:
        started = time.perf_counter()
        ledger = self.reconstruct_ledger()
        path = write_transfers(
            self._output(output, "share_ledger.csv"),
            ledger.transfers,
            extra={"provenance": [p.value for p in ledger.provenance]},
        )
        self._log("reconstruct", started, [path], len(ledger), {
            "cutover_block": ledger.cutover_block,
            "native": ledger.count(Provenance.NATIVE_EVENT),
        })
        return path

    def run_velocity(
        self,
        scope: Scope = Scope.GLOBAL,
        accounts: Optional[Sequence[str]] = None,
        output: Optional[str] = None,
    ) -> Path:
        started = time.perf_counter()
        records = self.load_ledger()
        settings = self.config.schedule
        samples = sample_series(
            records,
            self.schedule(records),
            scope=scope,
            accounts=[normalize_address(a) for a in accounts] if accounts else None,
            shard_count=self.config.shard_count,
            window=settings.window,
            window_stride=settings.window_stride,
            excluded=self.excluded(),
        )
        path = write_rows(
            self._output(output, "velocity.csv"),
            VELOCITY_COLUMNS,
            ([s.at_block, s.scope, s.velocity, s.money] for s in samples),
        )
        self._log("velocity", started, [path], len(records), {"samples": len(samples), "scope": Scope(scope).value})
        return path

    def run_decompose(self, output: Optional[str] = None) -> List[Path]:
        """Category per account, per-category velocity shares and the category summary."""
        started = time.perf_counter()
        records = self.load_ledger()
        table = self.category_table()
        receipts = self.receipts(records)
        received = received_totals(receipts)
        excluded = self.excluded()

        categories = [
            [account, amount, table.categorize(amount)]
            for account, amount in sorted(received.items())
            if account not in excluded
        ]
        shares = velocity_shares_by_category(
            records, self.schedule(records), table, received, self.config.shard_count, excluded
        )
        summary = category_summary(receipts, table, excluded)

        base = self._output(output, "categories.csv")
        paths = [
            write_rows(base, CATEGORY_COLUMNS, categories),
            write_rows(base.with_name(base.stem + "_shares.csv"), ["block_number"] + table.names,
                       ([s.at_block] + [s.shares[name] for name in table.names] for s in shares)),
            write_rows(base.with_name(base.stem + "_summary.csv"), SUMMARY_COLUMNS,
                       ([c.name, c.total_received, c.count] for c in summary)),
        ]
        self._log("decompose", started, paths, len(records), {"categories": table.names})
        return paths

    def run_balances(
        self,
        accounts: Optional[Sequence[str]] = None,
        output: Optional[str] = None,
    ) -> List[Path]:
        """Balance series of the given accounts (the top holders when none are given) plus the top-N table."""
        started = time.perf_counter()
        records = self.load_ledger()
        schedule = self.schedule(records)
        labels, flagged = self.labels()
        skip = flagged | set(self.config.exclude)
        ranked = top_holders(records, schedule[-1], self.config.top_n, skip) if schedule else []

        wanted = [normalize_address(a) for a in accounts] if accounts else [a for a, _ in ranked]
        smoothing = self.config.smoothing_days
        series = balance_series(
            records, wanted, schedule,
            smoothing_days=smoothing,
            time_index=self.time_index() if smoothing else None,
            labels=labels,
        )

        rows = []
        for item in series:
            smoothed = item.smoothed or [(block, None) for block, _ in item.points]
            for (block, balance), (_, mean) in zip(item.points, smoothed):
                rows.append([block, item.account, item.label, balance, mean])
        base = self._output(output, "balances.csv")
        paths = [
            write_rows(base, BALANCE_COLUMNS, rows),
            write_rows(base.with_name(base.stem + "_top.csv"), TOP_HOLDER_COLUMNS,
                       ([rank, a, labels.get(a), balance] for rank, (a, balance) in enumerate(ranked, start=1))),
        ]
        self._log("balances", started, paths, len(records), {"accounts": len(wanted), "smoothing_days": smoothing})
        return paths

    def run_wrapped_share(self, output: Optional[str] = None) -> Path:
        started = time.perf_counter()
        if self.config.token_kind is TokenKind.WSTETH:
            raise LedgerError("wrapped share needs a stETH ledger, not the wstETH token ledger")
        records = self.load_ledger()
        smoothing = self.config.smoothing_days
        points = wrapped_share_series(
            records,
            self.config.wsteth_address,
            self.schedule(records),
            smoothing_days=smoothing,
            time_index=self.time_index() if smoothing else None,
            burn_address=self.config.burn_address,
        )
        path = write_rows(
            self._output(output, "wrapped_share.csv"),
            WRAPPED_COLUMNS,
            ([p.at_block, p.fraction, p.smoothed] for p in points),
        )
        self._log("wrapped-share", started, [path], len(records), {"samples": len(points)})
        return path

    def run_supply(self, output: Optional[str] = None) -> Path:
        started = time.perf_counter()
        states = self.states()
        records = self.load_ledger() if self.config.transfers_path is not None else []
        settings = self.config.schedule
        if settings.start is not None and settings.end is not None:
            schedule = BlockChunker.sample_blocks(settings.start, settings.end, settings.stride)
        elif len(states):
            schedule = BlockChunker.sample_blocks(states.first_block, states.last_block, settings.stride)
        else:
            schedule = []
        points = supply_series(states, records, schedule)
        path = write_rows(
            self._output(output, "supply.csv"),
            SUPPLY_COLUMNS,
            ([p.block, p.total_shares, p.total_pooled_ether, p.conversion_rate, p.ledger_minted_shares]
             for p in points),
        )
        self._log("supply", started, [path], len(records), {"samples": len(points)})
        return path

    # ---- helpers ----

    def _output(self, output: Optional[str], default: str) -> Path:
        if output:
            return Path(output)
        return self.output_dir / default

    def _log(self, command: str, started: float, outputs: List[Path], records: int, extra: Dict[str, Any]) -> None:
        elapsed = time.perf_counter() - started
        logger.info(f"{command}: {records} records in {elapsed:.2f}s -> {', '.join(map(str, outputs))}")
        self.logger.log_run(
            command=command,
            parameters=self.config.model_dump(mode="json"),
            inputs=dict(self._inputs),
            records=records,
            outputs=[str(p) for p in outputs],
            elapsed=elapsed,
            extra=extra,
        )
