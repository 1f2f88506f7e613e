from pathlib import Path
import sys

import pytest

# Add project root to path
project_root = Path(__file__).parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from baseline.ledger.ledger import ZERO_ADDRESS, Denomination, TransferRecord, make_transfer


def addr(n: int) -> str:
    """Deterministic test address ending in the hex digits of n."""
    return "0x" + format(n, "040x")


@pytest.fixture
def make_record():
    """Factory for share-denominated records: make_record(block, log_index, sender, recipient, value)."""
    def build(block, log_index, sender, recipient, value, denomination=Denomination.SHARES) -> TransferRecord:
        return make_transfer(block, log_index, sender, recipient, value, denomination)
    return build


@pytest.fixture
def three_transfer_ledger():
    """Mint 10 to A at 10, mint 10 to A at 20, A sends 4 to B at 30."""
    a, b = addr(0xA), addr(0xB)
    return [
        make_transfer(10, 0, ZERO_ADDRESS, a, 10),
        make_transfer(20, 0, ZERO_ADDRESS, a, 10),
        make_transfer(30, 0, a, b, 4),
    ]
