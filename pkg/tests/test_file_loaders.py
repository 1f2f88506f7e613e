from fractions import Fraction
from pathlib import Path
import gzip
import sys

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from baseline.errors import DuplicateKey, ParseError
from baseline.ledger.ledger import MAX_UINT256, ZERO_ADDRESS, Denomination, LidoStateSnapshot, make_transfer
from utils.file_loaders import (
    STATE_COLUMNS,
    TRANSFER_COLUMNS,
    append_rows,
    load_category_table,
    load_labels,
    load_states,
    load_time_index,
    load_transfers,
    truncate_after_block,
    write_rows,
    write_states,
    write_transfers,
)

A = "0x" + "0" * 38 + "aa"
B = "0x" + "0" * 38 + "bb"
HEADER = ",".join(TRANSFER_COLUMNS)


def write(path: Path, *lines: str) -> Path:
    path.write_text("\n".join(lines) + "\n")
    return path


def test_header_only_file_is_an_empty_ledger(tmp_path):
    assert load_transfers(write(tmp_path / "t.csv", HEADER)) == []


def test_rows_are_sorted_and_typed(tmp_path):
    path = write(
        tmp_path / "t.csv",
        HEADER,
        f"20,1,0xab,{A},{B},5",
        f"10,3,,{ZERO_ADDRESS},{A},{MAX_UINT256}",
        f"20,0,0xcd,{A.upper().replace('0X', '0x')},{B},7",
    )
    records = load_transfers(path, Denomination.SHARES)
    assert [r.key for r in records] == [(10, 3), (20, 0), (20, 1)]
    assert records[0].value == MAX_UINT256
    assert records[0].tx_hash is None
    assert records[1].from_address == A
    assert all(r.denomination is Denomination.SHARES for r in records)


def test_duplicate_key_is_rejected(tmp_path):
    path = write(tmp_path / "t.csv", HEADER, f"1,0,,{A},{B},1", f"1,0,,{B},{A},1")
    with pytest.raises(DuplicateKey):
        load_transfers(path)


@pytest.mark.parametrize("bad_row", [
    f"1,0,,{A},{B},-5",
    f"1,0,,{A},{B},1.5",
    f"1,0,,{A},0x12,1",
    f"x,0,,{A},{B},1",
    f"1,0,,{A},{B},{MAX_UINT256 + 1}",
])
def test_bad_rows_report_their_line(tmp_path, bad_row):
    path = write(tmp_path / "t.csv", HEADER, f"1,0,,{A},{B},1", bad_row)
    with pytest.raises(ParseError) as info:
        load_transfers(path)
    assert info.value.line == 3
    assert info.value.path == str(path)


def test_missing_file_header_and_columns(tmp_path):
    with pytest.raises(ParseError):
        load_transfers(tmp_path / "absent.csv")
    with pytest.raises(ParseError):
        load_transfers(write(tmp_path / "empty.csv", ""))
    with pytest.raises(ParseError) as info:
        load_transfers(write(tmp_path / "cols.csv", "block_number,value", "1,2"))
    assert info.value.line == 1


def test_gzip_and_column_map(tmp_path):
    path = tmp_path / "t.csv.gz"
    with gzip.open(path, "wt") as handle:
        handle.write(f"blockNumber,logIndex,sender,receiver,amount\n5,0,{A},{B},9\n")
    column_map = {"blockNumber": "block_number", "logIndex": "log_index", "sender": "from_address",
                  "receiver": "to_address", "amount": "value"}
    [record] = load_transfers(path, column_map=column_map)
    assert (record.block, record.from_address, record.to_address, record.value) == (5, A, B, 9)


def test_transfers_write_then_load(tmp_path):
    records = [make_transfer(1, 0, ZERO_ADDRESS, A, MAX_UINT256, tx_hash="0x01"),
               make_transfer(2, 4, A, B, 3)]
    path = write_transfers(tmp_path / "out" / "t.csv", records, extra={"provenance": ["native", "reconstructed"]})
    assert path.read_text().splitlines()[0] == HEADER + ",provenance"
    assert load_transfers(path, Denomination.SHARES) == records


def test_states_keep_last_duplicate(tmp_path):
    path = write(
        tmp_path / "s.csv",
        ",".join(STATE_COLUMNS),
        "20,1,1,32,0,10",
        "10,0,0,0,5,5",
        "20,2,1,33,0,11",
    )
    states = load_states(path)
    assert [s.block for s in states] == [10, 20]
    assert states.lookup(25).deposited_validators == 2

    out = write_states(tmp_path / "copy.csv", states)
    assert list(load_states(out)) == list(states)


def test_time_index_labels_and_categories(tmp_path):
    index = load_time_index(write(tmp_path / "time.csv", "block_number,timestamp", "10,1000", "20,1120"))
    assert index.timestamp(15) == 1000

    labels, excluded = load_labels(write(
        tmp_path / "labels.csv", "address,label,exclude", f"{A.upper().replace('0X', '0x')},Pool,true", f"{B},Vault,",
    ))
    assert labels == {A: "Pool", B: "Vault"}
    assert excluded == {A}

    table = load_category_table(write(tmp_path / "bands.csv", "name,lower,upper", "Big,10,", "Small,0,10"))
    assert table.names == ["Big", "Small"]
    assert table.bands[0].lower == Fraction(10)

    with pytest.raises(ParseError):
        load_category_table(write(tmp_path / "gap.csv", "name,lower,upper", "Big,10,", "Small,0,5"))
    with pytest.raises(ParseError):
        load_labels(write(tmp_path / "bad.csv", "address,label", "0x12,Broken"))


def test_write_rows_formats_cells(tmp_path):
    path = write_rows(tmp_path / "rows.csv", ["a", "b", "c"], [[10**40, 0.5, None]])
    assert path.read_text().splitlines() == ["a,b,c", f"{10**40},0.5,"]


def test_append_then_truncate(tmp_path):
    path = tmp_path / "export.csv"
    append_rows(path, TRANSFER_COLUMNS, [[1, 0, "", ZERO_ADDRESS, A, 5]])
    append_rows(path, TRANSFER_COLUMNS, [[3, 0, "", A, B, 2], [7, 1, "", B, A, 1]])
    assert len(load_transfers(path)) == 3
    assert path.read_text().count("block_number") == 1

    truncate_after_block(path, TRANSFER_COLUMNS, 3)
    assert [r.block for r in load_transfers(path)] == [1, 3]
    truncate_after_block(path, TRANSFER_COLUMNS, None)
    assert load_transfers(path) == []
    truncate_after_block(tmp_path / "absent.csv", TRANSFER_COLUMNS, 1)
