from enum import Enum
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from baseline.errors import InvalidAddress, InvalidConfig
from baseline.ledger.ledger import BURN_ADDRESS, WSTETH_ADDRESS, normalize_address

RPC_ENV_VAR = "LST_RPC_URL"


class TokenKind(str, Enum):
    STETH_TOKENS = "steth-tokens"
    STETH_SHARES = "steth-shares"
    WSTETH = "wsteth"


def _address(value: str) -> str:
    try:
        return normalize_address(value)
    except InvalidAddress as e:
        raise ValueError(str(e))


class ScheduleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    start: Optional[int] = Field(None, ge=0)
    end: Optional[int] = Field(None, ge=0)
    stride: int = Field(7_200, gt=0)
    window: Optional[int] = Field(None, gt=0)
    window_stride: Optional[int] = Field(None, gt=0)

    @model_validator(mode="after")
    def check_range(self):
        if self.start is not None and self.end is not None and self.end < self.start:
            raise ValueError(f"end {self.end} is before start {self.start}")
        return self


class TimeIndexConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[Path] = None
    genesis_block: int = Field(0, ge=0)
    genesis_timestamp: int = Field(0, ge=0)
    seconds_per_block: float = Field(12.0, gt=0)


class RunConfig(BaseModel):
    """Everything one CLI run needs, validated before any replay starts."""

    model_config = ConfigDict(extra="forbid")

    transfers_path: Optional[Path] = None
    shares_path: Optional[Path] = None
    states_path: Optional[Path] = None
    received_path: Optional[Path] = None
    token_kind: TokenKind = TokenKind.STETH_SHARES
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    category_table_path: Optional[Path] = None
    labels_path: Optional[Path] = None
    time_index: TimeIndexConfig = Field(default_factory=TimeIndexConfig)
    output_dir: Path = Path("output")
    log_dir: Path = Path("logs")
    shard_count: int = Field(1, ge=1)
    workers: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, le=2**64 - 1)
    column_map: Dict[str, str] = Field(default_factory=dict)
    rpc_endpoint: Optional[str] = None
    event_topics: Dict[str, str] = Field(default_factory=dict)
    burn_address: str = BURN_ADDRESS
    wsteth_address: str = WSTETH_ADDRESS
    smoothing_days: Optional[float] = Field(None, gt=0)
    top_n: int = Field(5, ge=0)
    exclude: List[str] = Field(default_factory=list)

    @field_validator("burn_address", "wsteth_address")
    @classmethod
    def check_address(cls, value: str) -> str:
        return _address(value)

    @field_validator("exclude")
    @classmethod
    def check_excluded(cls, values: List[str]) -> List[str]:
        return [_address(v) for v in values]

    def require(self, *fields: str) -> None:
        """Raise InvalidConfig for the first listed field that is unset."""
        for name in fields:
            if getattr(self, name) is None:
                raise InvalidConfig(name, "required for this command")


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            base_value = merged.get(key)
            merged[key] = _merge(base_value if isinstance(base_value, dict) else {}, value)
        else:
            merged[key] = value
    return merged


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Build a RunConfig from an optional JSON file plus overrides.

    Args:
        path: JSON file with RunConfig fields
        overrides: Values (typically CLI flags) that win over the file; None is ignored

    Returns:
        Validated RunConfig
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidConfig("config", f"cannot read {path}: {e}")
    data = _merge(data, overrides or {})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "config"
        raise InvalidConfig(field, first["msg"])


def resolve_rpc_endpoint(explicit: Optional[str] = None) -> str:
    """The explicit endpoint, else LST_RPC_URL from the environment or a .env file."""
    if explicit:
        return explicit
    load_dotenv()
    endpoint = os.getenv(RPC_ENV_VAR)
    if not endpoint:
        raise InvalidConfig("rpc_endpoint", f"pass --rpc or set {RPC_ENV_VAR}")
    return endpoint
