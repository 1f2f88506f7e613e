from pathlib import Path
import json
import logging
from typing import Any, Dict, List, Literal, Mapping, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from baseline.errors import InvalidConfig
from baseline.ledger.ledger import (
    BURN_ADDRESS,
    DEPOSIT_SIZE,
    MAX_UINT64,
    ZERO_ADDRESS,
    Denomination,
    LidoStateSnapshot,
    TransferRecord,
    mul_div,
    total_pooled_ether,
)
from baseline.shares.shares import StateSeries, shares_to_tokens
from utils.file_loaders import write_states, write_transfers

logger = logging.getLogger(__name__)

# spend draws are balance * k / 2**53 with k uniform in [1, 2**53]
SPEND_RESOLUTION = 2**53
PPM = 1_000_000


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, le=MAX_UINT64)
    accounts: int = Field(20, ge=0)
    transfers: int = Field(500, ge=0)
    start_block: int = Field(1_000, ge=1)
    block_span: int = Field(20_000, ge=1)
    mint_fraction: float = Field(0.2, ge=0, le=1)
    value_log_min: float = Field(15.0, ge=0)
    value_log_max: float = Field(22.0, ge=0)
    whale_fraction: float = Field(0.0, ge=0, le=1)
    burn_fraction: float = Field(0.0, ge=0, le=1)
    reward_ppm: int = Field(100, ge=0)
    rebase_period: int = Field(7_200, ge=1)
    denomination: Denomination = Denomination.SHARES
    algorithm: Literal["philox"] = "philox"

    @model_validator(mode="after")
    def check_bounds(self):
        if self.value_log_max < self.value_log_min:
            raise ValueError("value_log_max must be >= value_log_min")
        if self.value_log_max > 60:
            raise ValueError("value_log_max above 60 leaves the uint256 range after rebases")
        if self.transfers and not self.accounts:
            raise ValueError("transfers need at least one account")
        return self

    @property
    def end_block(self) -> int:
        return self.start_block + self.block_span - 1


def make_generator_config(data: Union[GeneratorConfig, Mapping[str, Any], None] = None, **overrides) -> GeneratorConfig:
    """Validate generator settings, reporting the first bad field as InvalidConfig."""
    if isinstance(data, GeneratorConfig):
        data = data.model_dump()
    try:
        return GeneratorConfig.model_validate({**(data or {}), **overrides})
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "generator"
        raise InvalidConfig(field, first["msg"])


class _Holders:
    """Accounts with a positive balance; O(1) add, remove and uniform pick."""

    def __init__(self):
        self._items: List[str] = []
        self._index: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, account: str) -> bool:
        return account in self._index

    def add(self, account: str) -> None:
        if account not in self._index:
            self._index[account] = len(self._items)
            self._items.append(account)

    def remove(self, account: str) -> None:
        position = self._index.pop(account)
        last = self._items.pop()
        if position < len(self._items):
            self._items[position] = last
            self._index[last] = position

    def pick(self, rng: np.random.Generator) -> str:
        return self._items[int(rng.integers(len(self._items)))]


class _LidoModel:
    """Pool accounting: buffered ether, 32-ETH validator deposits and beacon rewards."""

    def __init__(self, reward_ppm: int):
        self.reward_ppm = reward_ppm
        self.deposited_validators = 0
        self.beacon_validators = 0
        self.beacon_balance = 0
        self.buffered_ether = 0
        self.total_shares = 0

    def snapshot(self, block: int) -> LidoStateSnapshot:
        return LidoStateSnapshot(
            block=block,
            deposited_validators=self.deposited_validators,
            beacon_validators=self.beacon_validators,
            beacon_balance=self.beacon_balance,
            buffered_ether=self.buffered_ether,
            total_shares=self.total_shares,
        )

    def submit(self, ether: int) -> int:
        """Deposit ether and return the shares minted for it."""
        pooled = total_pooled_ether(self.snapshot(0))
        shares = ether if pooled == 0 else max(1, mul_div(ether, self.total_shares, pooled))
        self.buffered_ether += ether
        self.total_shares += shares
        validators = self.buffered_ether // DEPOSIT_SIZE
        if validators:
            self.deposited_validators += validators
            self.buffered_ether -= validators * DEPOSIT_SIZE
        return shares

    def rebase(self) -> None:
        appeared = self.deposited_validators - self.beacon_validators
        self.beacon_validators = self.deposited_validators
        self.beacon_balance += appeared * DEPOSIT_SIZE
        self.beacon_balance += self.beacon_balance * self.reward_ppm // PPM


def _addresses(rng: np.random.Generator, count: int) -> List[str]:
    reserved = {ZERO_ADDRESS, BURN_ADDRESS}
    seen = set()
    addresses = []
    while len(addresses) < count:
        address = "0x" + rng.bytes(20).hex()
        if address in reserved or address in seen:
            continue
        seen.add(address)
        addresses.append(address)
    return addresses


def generate(config: Union[GeneratorConfig, Mapping[str, Any], None] = None) -> Tuple[List[TransferRecord], StateSeries]:
    """
    Build a reproducible synthetic ledger and the matching Lido state series.

    Spends are drawn as a fraction of the sender's current balance, so the
    ledger never overdraws. Share values are exact; with the token
    denomination every value is converted with the end-of-block state.

    Returns:
        (records sorted by (block, log_index), StateSeries)
    """
    config = make_generator_config(config)
    rng = np.random.Generator(np.random.Philox(config.seed))
    accounts = _addresses(rng, config.accounts)
    whale = accounts[0] if accounts else None

    blocks = np.sort(rng.integers(config.start_block, config.end_block, size=config.transfers, endpoint=True))
    lido = _LidoModel(config.reward_ppm)
    snapshots: Dict[int, LidoStateSnapshot] = {config.start_block - 1: lido.snapshot(config.start_block - 1)}
    rebase_blocks = iter(range(config.start_block + config.rebase_period - 1, config.end_block + 1, config.rebase_period))
    next_rebase = next(rebase_blocks, None)

    balances: Dict[str, int] = {}
    holders = _Holders()
    records: List[TransferRecord] = []
    log_index = 0
    previous_block = None

    def credit(account: str, amount: int) -> None:
        balances[account] = balances.get(account, 0) + amount
        if account != BURN_ADDRESS:
            holders.add(account)

    for raw_block in blocks:
        block = int(raw_block)
        while next_rebase is not None and next_rebase < block:
            lido.rebase()
            snapshots[next_rebase] = lido.snapshot(next_rebase)
            next_rebase = next(rebase_blocks, None)
        log_index = log_index + 1 if block == previous_block else 0
        previous_block = block

        if not holders or rng.random() < config.mint_fraction:
            ether = int(10 ** rng.uniform(config.value_log_min, config.value_log_max))
            ether = max(1, ether)
            recipient = whale if rng.random() < config.whale_fraction else accounts[int(rng.integers(len(accounts)))]
            shares = lido.submit(ether)
            credit(recipient, shares)
            records.append(TransferRecord(block, log_index, ZERO_ADDRESS, recipient, shares))
        else:
            through_whale = rng.random() < config.whale_fraction
            if through_whale and whale in holders:
                sender = whale
            else:
                sender = holders.pick(rng)
            if rng.random() < config.burn_fraction:
                recipient = BURN_ADDRESS
            elif through_whale and sender != whale:
                recipient = whale
            elif len(accounts) > 1:
                recipient = accounts[int(rng.integers(len(accounts) - 1))]
                if recipient == sender:
                    recipient = accounts[-1]
            else:
                recipient = BURN_ADDRESS
            k = int(rng.integers(1, SPEND_RESOLUTION, endpoint=True))
            amount = max(1, balances[sender] * k // SPEND_RESOLUTION)
            balances[sender] -= amount
            if not balances[sender]:
                del balances[sender]
                holders.remove(sender)
            credit(recipient, amount)
            records.append(TransferRecord(block, log_index, sender, recipient, amount))
        snapshots[block] = lido.snapshot(block)

    while next_rebase is not None:
        lido.rebase()
        snapshots[next_rebase] = lido.snapshot(next_rebase)
        next_rebase = next(rebase_blocks, None)

    states = StateSeries(snapshots.values())
    if config.denomination is Denomination.TOKENS:
        records = [
            r.converted(shares_to_tokens(r.value, states.lookup(r.block)), Denomination.TOKENS)
            for r in records
        ]
    logger.info(f"Generated {len(records)} records over {len(accounts)} accounts (seed {config.seed})")
    return records, states


def dump_dataset(
    config: Union[GeneratorConfig, Mapping[str, Any], None],
    directory: Union[str, Path],
    prefix: str = "",
) -> Dict[str, Path]:
    """Generate and write transfers, states and the effective config to `directory`."""
    config = make_generator_config(config)
    records, states = generate(config)
    directory = Path(directory)
    paths = {
        "transfers": write_transfers(directory / f"{prefix}transfers.csv", records),
        "states": write_states(directory / f"{prefix}states.csv", states),
        "config": directory / f"{prefix}generator.json",
    }
    with open(paths["config"], 'w', encoding='utf-8') as f:
        json.dump(config.model_dump(mode="json"), f, indent=2, sort_keys=True)
        f.write("\n")
    return paths
