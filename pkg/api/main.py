from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from typing import List, Dict, Any, Optional, Union
from pathlib import Path
import logging
import os
import sys
import time

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from baseline.errors import LedgerError
from baseline.ledger.ledger import make_transfer, normalize_address, sort_records
from baseline.velocity.velocity import Scope, sample_series
from evaluation.evaluation import run_selfcheck
from utils.logger import RunLogger

log = logging.getLogger(__name__)

app = FastAPI(
    title="LST Velocity API",
    description="API for sampling token velocity of transfer ledgers",
    version="1.0.0"
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],  # Allows all origins
    allow_credentials=True,
    allow_methods=["*"],  # Allows all methods
    allow_headers=["*"],  # Allows all headers
)

logger = RunLogger(os.getenv("LST_LOG_DIR", str(project_root / "logs")), log_prefix="api_")


class Transfer(BaseModel):
    block: int = Field(ge=0)
    log_index: int = Field(ge=0)
    from_address: str
    to_address: str
    # decimal strings keep 256-bit values exact in JSON
    value: Union[int, str]


class VelocityRequest(BaseModel):
    records: List[Transfer]
    schedule: List[int]
    scope: Scope = Scope.GLOBAL
    accounts: Optional[List[str]] = None
    shard_count: int = Field(1, ge=1)
    window: Optional[int] = Field(None, gt=0)
    window_stride: Optional[int] = Field(None, gt=0)


class Sample(BaseModel):
    at_block: int
    scope: str
    velocity: float
    money: str


class VelocityResponse(BaseModel):
    samples: List[Sample]


class SelfcheckRequest(BaseModel):
    seed: int = Field(0, ge=0, le=2**64 - 1)
    ledgers: int = Field(5, ge=1, le=50)
    accounts: int = Field(10, ge=1, le=50)
    transfers: int = Field(200, ge=0, le=2000)


def _value(raw: Union[int, str]) -> int:
    if isinstance(raw, int):
        return raw
    if not raw.strip().isdecimal():
        raise HTTPException(status_code=422, detail=f"value is not an unsigned decimal: {raw!r}")
    return int(raw)


@app.post("/velocity", response_model=VelocityResponse)
async def velocity(request: VelocityRequest):
    """
    Replay the posted transfers and sample velocity at the scheduled blocks.

    Args:
        request: Transfers, sample blocks and scope

    Returns:
        Samples ordered by block, global sample first
    """
    started = time.perf_counter()
    try:
        records = sort_records(
            make_transfer(t.block, t.log_index, t.from_address, t.to_address, _value(t.value))
            for t in request.records
        )
        samples = sample_series(
            records,
            request.schedule,
            scope=request.scope,
            accounts=[normalize_address(a) for a in request.accounts] if request.accounts else None,
            shard_count=request.shard_count,
            window=request.window,
            window_stride=request.window_stride,
        )
    except LedgerError as e:
        raise HTTPException(status_code=422, detail=f"{type(e).__name__}: {e}")
    except HTTPException:
        raise
    except Exception as e:
        log.exception("velocity request failed")
        raise HTTPException(status_code=500, detail=str(e))

    logger.log_run(
        command="api:velocity",
        parameters={"scope": request.scope.value, "schedule": len(request.schedule),
                    "shard_count": request.shard_count},
        records=len(records),
        elapsed=time.perf_counter() - started,
    )
    return VelocityResponse(samples=[
        Sample(at_block=s.at_block, scope=s.scope, velocity=s.velocity, money=str(s.money))
        for s in samples
    ])


@app.post("/selfcheck")
async def selfcheck(request: SelfcheckRequest):
    """Run the oracle suite on small synthetic ledgers."""
    started = time.perf_counter()
    try:
        report = run_selfcheck(request.seed, request.ledgers, request.accounts, request.transfers)
    except LedgerError as e:
        raise HTTPException(status_code=422, detail=f"{type(e).__name__}: {e}")
    except Exception as e:
        log.exception("selfcheck failed")
        raise HTTPException(status_code=500, detail=str(e))
    logger.log_run(
        command="api:selfcheck",
        parameters=request.model_dump(),
        elapsed=time.perf_counter() - started,
        extra=report["summary"],
    )
    return report


@app.get("/")
async def root():
    """Root endpoint with basic information"""
    return {
        "message": "Welcome to the LST Velocity API",
        "endpoints": {
            "/velocity": "POST - Sample velocity of a posted ledger",
            "/selfcheck": "POST - Run the oracle suite on synthetic ledgers",
            "/api/logs": "GET - Run log entries",
            "/": "GET - This information page"
        }
    }


@app.get("/api/logs")
async def get_logs(n: Optional[int] = None) -> List[Dict[str, Any]]:
    """
    Get run log entries written by the API.

    Args:
        n: Only the n most recent entries of today's log

    Returns:
        List of log entries
    """
    try:
        if n is not None:
            return logger.get_recent_logs(n)
        return logger.get_all_logs()
    except Exception as e:
        raise HTTPException(
            status_code=500,
            detail=f"Error reading run log files: {str(e)}"
        )


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)


# curl -X POST "http://localhost:8000/velocity" \
#      -H "Content-Type: application/json" \
#      -d '{"records": [{"block": 0, "log_index": 0, "from_address": "0x0000000000000000000000000000000000000000",
#           "to_address": "0x00000000000000000000000000000000000000aa", "value": "10"}], "schedule": [100]}'
