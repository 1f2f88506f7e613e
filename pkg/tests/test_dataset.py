"""
Checks against the public stETH / wstETH exports.

Skipped unless LST_DATASET_DIR points at a directory holding
steth_transfers.csv, steth_transfer_shares.csv and wsteth_transfers.csv
(gzip variants with a .csv.gz suffix are accepted).
"""
from pathlib import Path
import os
import sys

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from baseline.ledger.ledger import (
    FIRST_TRANSFER_SHARES_BLOCK,
    FIRST_WSTETH_BLOCK,
    STUDY_FIRST_BLOCK,
    STUDY_LAST_BLOCK,
    Denomination,
)
from utils.file_loaders import load_transfers

DATASET_DIR = os.getenv("LST_DATASET_DIR")

pytestmark = pytest.mark.skipif(not DATASET_DIR, reason="LST_DATASET_DIR not set")

# rows, first block, last block
EXPORTS = {
    "steth_transfers": (2_792_968, STUDY_FIRST_BLOCK, STUDY_LAST_BLOCK),
    "steth_transfer_shares": (2_519_615, FIRST_TRANSFER_SHARES_BLOCK, STUDY_LAST_BLOCK),
    "wsteth_transfers": (1_420_359, FIRST_WSTETH_BLOCK, STUDY_LAST_BLOCK),
}


def _export(name: str) -> Path:
    for suffix in (".csv", ".csv.gz"):
        path = Path(DATASET_DIR) / f"{name}{suffix}"
        if path.exists():
            return path
    pytest.skip(f"{name} export not found in {DATASET_DIR}")


@pytest.fixture(scope="module")
def steth_transfers():
    return load_transfers(_export("steth_transfers"), Denomination.TOKENS)


@pytest.fixture(scope="module")
def steth_transfer_shares():
    return load_transfers(_export("steth_transfer_shares"), Denomination.SHARES)


def test_steth_transfer_export(steth_transfers):
    rows, first, last = EXPORTS["steth_transfers"]
    assert len(steth_transfers) == rows
    assert (steth_transfers[0].block, steth_transfers[-1].block) == (first, last)


def test_steth_transfer_shares_export(steth_transfer_shares):
    rows, first, last = EXPORTS["steth_transfer_shares"]
    assert len(steth_transfer_shares) == rows
    assert (steth_transfer_shares[0].block, steth_transfer_shares[-1].block) == (first, last)


def test_wsteth_transfer_export():
    rows, first, last = EXPORTS["wsteth_transfers"]
    records = load_transfers(_export("wsteth_transfers"), Denomination.TOKENS)
    assert len(records) == rows
    assert (records[0].block, records[-1].block) == (first, last)


def test_token_records_cover_the_gap_before_native_shares(steth_transfers, steth_transfer_shares):
    cutover = steth_transfer_shares[0].block
    assert cutover == FIRST_TRANSFER_SHARES_BLOCK
    before = [r for r in steth_transfers if r.block < cutover]
    assert before[0].block == EXPORTS["steth_transfers"][1]
    assert before[-1].block < cutover
