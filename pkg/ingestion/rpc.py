from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import os
from pathlib import Path
import time
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Union

from eth_abi import decode
from eth_abi.exceptions import DecodingError
from eth_utils import keccak
import requests

from baseline.errors import ArchiveRequired, DecodeError, InvalidAddress, OrphanCheckpoint, RpcError
from baseline.ledger.ledger import STETH_ADDRESS, normalize_address
from utils.chunkers import BlockChunker
from utils.file_loaders import (
    STATE_COLUMNS,
    TRANSFER_COLUMNS,
    StateCsvRow,
    TransferCsvRow,
    append_rows,
    truncate_after_block,
    write_rows,
)

logger = logging.getLogger(__name__)

# Both events share the (indexed from, indexed to, uint256) layout
EVENT_SIGNATURES: Dict[str, str] = {
    "Transfer": "Transfer(address,address,uint256)",
    "TransferShares": "TransferShares(address,address,uint256)",
}

STATE_CALLS: Dict[str, str] = {
    "getBeaconStat": "getBeaconStat()",
    "getBufferedEther": "getBufferedEther()",
    "getTotalShares": "getTotalShares()",
}

# node error messages meaning the historical state has been pruned
ARCHIVE_ERROR_PATTERNS = (
    "missing trie node",
    "header not found",
    "state is not available",
    "pruned",
    "archive",
)

TRANSIENT_RPC_CODES = {-32005, -32603}


def topic_hash(signature: str) -> str:
    return "0x" + keccak(text=signature).hex()


def selector(signature: str) -> str:
    return "0x" + keccak(text=signature)[:4].hex()


EVENT_TOPICS: Dict[str, str] = {name: topic_hash(sig) for name, sig in EVENT_SIGNATURES.items()}
STATE_SELECTORS: Dict[str, str] = {name: selector(sig) for name, sig in STATE_CALLS.items()}


def resolve_topic(event: str, overrides: Optional[Mapping[str, str]] = None) -> str:
    """Topic hash for an event name from the registry (or overrides), or a raw 0x topic."""
    registry = {**EVENT_TOPICS, **(overrides or {})}
    if event in registry:
        return registry[event].lower()
    if event.startswith("0x") and len(event) == 66:
        return event.lower()
    if "(" in event:
        return topic_hash(event)
    raise DecodeError(f"unknown event {event!r}; known: {sorted(registry)}")


class JsonRpcClient:
    """Minimal JSON-RPC over HTTP with retries for transient failures."""

    def __init__(self,
                 endpoint: str,
                 session: Optional[requests.Session] = None,
                 max_attempts: int = 5,
                 backoff: float = 0.5,
                 timeout: float = 60):
        self.endpoint = endpoint
        self.session = session or requests.Session()
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout
        self._next_id = 0

    def call(self, method: str, params: Sequence[Any]) -> Any:
        self._next_id += 1
        payload = {"id": self._next_id, "jsonrpc": "2.0", "method": method, "params": list(params)}
        for attempt in range(1, self.max_attempts + 1):
            try:
                return self._post(payload)
            except RpcError as e:
                if not e.transient or attempt == self.max_attempts:
                    raise
                delay = self.backoff * 2 ** (attempt - 1)
                logger.warning(f"{method} failed ({e}), retry {attempt}/{self.max_attempts - 1} in {delay:.2f}s")
                time.sleep(delay)

    def _post(self, payload: Dict[str, Any]) -> Any:
        try:
            response = self.session.post(self.endpoint, json=payload, timeout=self.timeout)
        except requests.RequestException as e:
            raise RpcError(f"request failed: {e}", transient=True)

        status = response.status_code
        if status == 429 or status >= 500:
            raise RpcError(f"HTTP {status}", code=status, transient=True)
        if status >= 400:
            raise RpcError(f"HTTP {status}", code=status)
        try:
            body = response.json()
        except ValueError:
            raise RpcError("response is not JSON", transient=True)

        if body.get("error"):
            error = body["error"]
            message = str(error.get("message", error)) if isinstance(error, dict) else str(error)
            code = error.get("code") if isinstance(error, dict) else None
            if any(p in message.lower() for p in ARCHIVE_ERROR_PATTERNS):
                raise ArchiveRequired(
                    f"endpoint cannot serve historical state ({message}); an archive node is required",
                    code=code,
                )
            raise RpcError(message, code=code, transient=code in TRANSIENT_RPC_CODES)
        if "result" not in body:
            raise RpcError("response carries neither result nor error")
        return body["result"]

    def block_number(self) -> int:
        return int(self.call("eth_blockNumber", []), 16)


class Checkpoint:
    """Last fully processed block, stored as a single decimal line."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def read(self) -> Optional[int]:
        if not self.path.exists():
            return None
        text = self.path.read_text(encoding='utf-8').strip()
        if not text:
            return None
        if not text.isdecimal():
            raise DecodeError(f"checkpoint {self.path} is not a decimal block number: {text!r}")
        return int(text)

    def commit(self, block: int) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        scratch = self.path.with_name(self.path.name + ".tmp")
        scratch.write_text(f"{block}\n", encoding='utf-8')
        os.replace(scratch, self.path)

    def resume_from(self, start: int) -> int:
        last = self.read()
        return start if last is None else max(start, last + 1)


def _topic_address(topic: str) -> str:
    (address,) = decode(["address"], bytes.fromhex(topic[2:]))
    return normalize_address(address)


def decode_log(log: Mapping[str, Any], topic: Optional[str] = None) -> TransferCsvRow:
    """Decode a Transfer or TransferShares log into a canonical row."""
    try:
        topics = log["topics"]
        if len(topics) != 3:
            raise DecodeError(f"expected 3 topics, got {len(topics)}")
        if topic is not None and topics[0].lower() != topic:
            raise DecodeError(f"unexpected topic {topics[0]}")
        (value,) = decode(["uint256"], bytes.fromhex(log["data"][2:]))
        return TransferCsvRow(
            block_number=int(log["blockNumber"], 16),
            log_index=int(log["logIndex"], 16),
            tx_hash=(log.get("transactionHash") or "").lower(),
            from_address=_topic_address(topics[1]),
            to_address=_topic_address(topics[2]),
            value=value,
        )
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError, DecodingError, InvalidAddress) as e:
        where = log.get("blockNumber"), log.get("logIndex")
        raise DecodeError(f"malformed log at {where}: {e}")


@dataclass
class LogPage:
    from_block: int
    to_block: int
    rows: List[TransferCsvRow] = field(default_factory=list)


def _fetch_page(client, contract: str, topic: str, from_block: int, to_block: int) -> LogPage:
    logs = client.call("eth_getLogs", [{
        "address": contract,
        "fromBlock": hex(from_block),
        "toBlock": hex(to_block),
        "topics": [topic],
    }])
    rows = [decode_log(log, topic) for log in logs if not log.get("removed")]
    rows.sort(key=lambda r: (r.block_number, r.log_index))
    logger.debug(f"Blocks {from_block}-{to_block}: {len(rows)} logs")
    return LogPage(from_block, to_block, rows)


def iter_log_pages(
    client,
    contract: str,
    topic: str,
    start: int,
    end: int,
    page_size: int = 2_000,
    checkpoint: Optional[Checkpoint] = None,
    concurrency: int = 4,
) -> Iterator[LogPage]:
    """
    Pages of decoded logs in block order.

    Up to `concurrency` pages are requested at once; pages are still yielded
    strictly in order so a checkpoint can be committed after each one.
    """
    if checkpoint is not None:
        start = checkpoint.resume_from(start)
    contract = normalize_address(contract)
    pages = BlockChunker.chunk_range(start, end, page_size)
    logger.info(f"Fetching {len(pages)} pages of logs for blocks {start}-{end}")
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as executor:
        for batch in BlockChunker.chunk_records(pages, max(1, concurrency)):
            yield from executor.map(lambda p: _fetch_page(client, contract, topic, *p), batch)


def fetch_logs(
    client,
    contract: str = STETH_ADDRESS,
    event: str = "Transfer",
    start: int = 0,
    end: Optional[int] = None,
    page_size: int = 2_000,
    checkpoint: Optional[Checkpoint] = None,
    concurrency: int = 4,
    topics: Optional[Mapping[str, str]] = None,
) -> Iterator[TransferCsvRow]:
    """
    Stream decoded transfer rows for [start, end].

    The checkpoint moves to the end of each page once its rows have been
    consumed, empty pages included.

    Args:
        client: Object with a JSON-RPC style call(method, params)
        contract: Emitting contract address
        event: Registry name, full signature or raw topic hash
        start: First block
        end: Last block (inclusive), the chain head when None
        page_size: Blocks per eth_getLogs query
        checkpoint: Optional resume point
        concurrency: Page requests in flight
        topics: Overrides for the event topic registry

    Returns:
        Iterator of TransferCsvRow in (block, log_index) order
    """
    topic = resolve_topic(event, topics)
    if end is None:
        end = int(client.call("eth_blockNumber", []), 16)
    for page in iter_log_pages(client, contract, topic, start, end, page_size, checkpoint, concurrency):
        yield from page.rows
        if checkpoint is not None:
            checkpoint.commit(page.to_block)


def _call_view(client, contract: str, name: str, block: int) -> bytes:
    result = client.call("eth_call", [{"to": contract, "data": STATE_SELECTORS[name]}, hex(block)])
    if not isinstance(result, str) or not result.startswith("0x"):
        raise DecodeError(f"{name} at block {block} returned {result!r}")
    return bytes.fromhex(result[2:])


def _read_state(client, contract: str, block: int) -> StateCsvRow:
    try:
        deposited, beacon_validators, beacon_balance = decode(
            ["uint256", "uint256", "uint256"], _call_view(client, contract, "getBeaconStat", block)
        )
        (buffered,) = decode(["uint256"], _call_view(client, contract, "getBufferedEther", block))
        (total_shares,) = decode(["uint256"], _call_view(client, contract, "getTotalShares", block))
    except (DecodingError, ValueError) as e:
        raise DecodeError(f"cannot decode state at block {block}: {e}")
    return StateCsvRow(block, deposited, beacon_validators, beacon_balance, buffered, total_shares)


def fetch_state(
    client,
    contract: str = STETH_ADDRESS,
    start: int = 0,
    end: Optional[int] = None,
    stride: int = 1,
    checkpoint: Optional[Checkpoint] = None,
    concurrency: int = 4,
) -> Iterator[StateCsvRow]:
    """Historical Lido state at start, start+stride, ... and end; needs an archive endpoint."""
    if end is None:
        end = int(client.call("eth_blockNumber", []), 16)
    blocks = BlockChunker.sample_blocks(start, end, stride)
    if checkpoint is not None:
        first = checkpoint.resume_from(start)
        blocks = [b for b in blocks if b >= first]
    contract = normalize_address(contract)
    logger.info(f"Reading state at {len(blocks)} blocks")
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as executor:
        for batch in BlockChunker.chunk_records(blocks, max(1, concurrency)):
            for row in executor.map(lambda b: _read_state(client, contract, b), batch):
                yield row
                if checkpoint is not None:
                    checkpoint.commit(row.block_number)


def _prepare_output(out: Path, columns: Sequence[str], checkpoint: Optional[Checkpoint]) -> None:
    last = checkpoint.read() if checkpoint is not None else None
    if last is None:
        write_rows(out, columns, [])
    elif not out.exists():
        raise OrphanCheckpoint(f"checkpoint {checkpoint.path} is at block {last} but {out} is missing")
    else:
        # rows past the checkpoint belong to a page that was never committed
        truncate_after_block(out, columns, last)


def export_logs(
    client,
    out: Union[str, Path],
    contract: str = STETH_ADDRESS,
    event: str = "Transfer",
    start: int = 0,
    end: Optional[int] = None,
    page_size: int = 2_000,
    checkpoint: Optional[Checkpoint] = None,
    concurrency: int = 4,
    topics: Optional[Mapping[str, str]] = None,
) -> int:
    """Append fetched rows to `out` page by page, committing the checkpoint after each write."""
    out = Path(out)
    _prepare_output(out, TRANSFER_COLUMNS, checkpoint)
    topic = resolve_topic(event, topics)
    if end is None:
        end = int(client.call("eth_blockNumber", []), 16)
    written = 0
    for page in iter_log_pages(client, contract, topic, start, end, page_size, checkpoint, concurrency):
        if page.rows:
            append_rows(out, TRANSFER_COLUMNS, [row.cells() for row in page.rows])
            written += len(page.rows)
        if checkpoint is not None:
            checkpoint.commit(page.to_block)
    return written


def export_state(
    client,
    out: Union[str, Path],
    contract: str = STETH_ADDRESS,
    start: int = 0,
    end: Optional[int] = None,
    stride: int = 1,
    checkpoint: Optional[Checkpoint] = None,
    concurrency: int = 4,
) -> int:
    out = Path(out)
    _prepare_output(out, STATE_COLUMNS, checkpoint)
    written = 0
    for row in fetch_state(client, contract, start, end, stride, checkpoint, concurrency):
        append_rows(out, STATE_COLUMNS, [row.cells()])
        written += 1
    return written
