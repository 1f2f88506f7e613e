from fractions import Fraction
from pathlib import Path
import sys

from hypothesis import given, settings, strategies as st
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from baseline.errors import InvalidCategoryTable, MissingTimeIndex, ZeroSupply
from baseline.ledger.ledger import BURN_ADDRESS, WEI, ZERO_ADDRESS, make_transfer, sort_records
from baseline.velocity.velocity import LedgerState, replay
from evaluation.synthetic import generate
from specialization.decomposition import (
    BlockTimeIndex,
    CategoryBand,
    CategoryTable,
    balance_series,
    categorize,
    category_summary,
    received_totals,
    smooth,
    top_holders,
    total_received,
    velocity_shares_by_category,
    wrapped_share,
    wrapped_share_series,
)
from utils.chunkers import BlockChunker

A = "0x" + "0" * 38 + "aa"
B = "0x" + "0" * 38 + "bb"
C = "0x" + "0" * 38 + "cc"
WRAPPER = "0x7f39c581f595b53c5cb19bd0b3f8da6c935e2ca0"

BLOCKS_PER_DAY = 7_200


def rec(block, sender, recipient, value, log_index=0):
    return make_transfer(block, log_index, sender, recipient, value)


@pytest.mark.parametrize("received, expected", [
    (10_000 * WEI, "Whale"),
    (10_000 * WEI - 1, "Orca"),
    (3_000 * WEI, "Orca"),
    (1_000 * WEI, "Dolphin"),
    (100 * WEI, "Fish"),
    (10 * WEI, "Shrimp"),
    (1 * WEI, "Krill"),
    (WEI - 1, "Plankton"),
    (WEI // 2, "Plankton"),
    (0, "Plankton"),
])
def test_default_band_boundaries(received, expected):
    """Lower bounds are inclusive"""
    assert categorize(received) == expected


@pytest.mark.parametrize("bands", [
    [],
    [CategoryBand("Top", Fraction(10)), CategoryBand("Low", Fraction(0), Fraction(5))],
    [CategoryBand("Top", Fraction(10)), CategoryBand("Top", Fraction(0), Fraction(10))],
    [CategoryBand("Top", Fraction(10), Fraction(20)), CategoryBand("Low", Fraction(0), Fraction(10))],
    [CategoryBand("Top", Fraction(10)), CategoryBand("Low", Fraction(1), Fraction(10))],
])
def test_invalid_tables_are_rejected(bands):
    with pytest.raises(InvalidCategoryTable):
        CategoryTable(bands)


def test_two_band_table():
    table = CategoryTable([CategoryBand("Big", Fraction(5)), CategoryBand("Small", Fraction(0), Fraction(5))])
    assert table.names == ["Big", "Small"]
    assert table.categorize(5 * WEI) == "Big"
    assert table.categorize(5 * WEI - 1) == "Small"


def test_received_totals():
    ledger = [rec(1, ZERO_ADDRESS, A, 3), rec(2, ZERO_ADDRESS, A, 4), rec(3, A, A, 5), rec(4, A, B, 2)]
    assert received_totals(ledger) == {A: 7, B: 2}
    assert total_received(ledger, A) == 7
    assert total_received(ledger, C) == 0


def test_category_summary_counts_accounts():
    ledger = [
        rec(1, ZERO_ADDRESS, A, 20_000 * WEI),
        rec(2, ZERO_ADDRESS, B, 5 * WEI),
        rec(3, A, C, 5 * WEI),
        rec(4, C, BURN_ADDRESS, WEI),
    ]
    summary = {s.name: s for s in category_summary(ledger)}
    assert (summary["Whale"].count, summary["Whale"].total_received) == (1, 20_000 * WEI)
    assert (summary["Krill"].count, summary["Krill"].total_received) == (2, 10 * WEI)
    assert summary["Plankton"].count == 0
    assert list(summary) == CategoryTable.default().names


@pytest.fixture
def mixed_ledger():
    return [
        rec(100, ZERO_ADDRESS, A, 50_000 * WEI),
        rec(150, ZERO_ADDRESS, B, 2 * WEI),
        rec(200, A, C, 500 * WEI),
        rec(300, C, B, 1 * WEI),
    ]


def test_category_shares_sum_to_one(mixed_ledger):
    results = velocity_shares_by_category(mixed_ledger, [100, 160, 250, 400])
    assert [r.at_block for r in results] == [100, 160, 250, 400]
    for result in results:
        assert sum(result.shares.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(0 <= share <= 1 for share in result.shares.values())
    assert results[0].shares["Whale"] == 1.0


def test_category_shares_skip_empty_blocks(mixed_ledger):
    results = velocity_shares_by_category(mixed_ledger, [50, 100])
    assert [r.at_block for r in results] == [100]


def test_equal_holders_split_evenly():
    ledger = [rec(10, ZERO_ADDRESS, A, 20_000 * WEI), rec(10, ZERO_ADDRESS, B, 5 * WEI, log_index=1)]
    received = {A: 20_000 * WEI, B: 20_000 * WEI}
    only_whales = velocity_shares_by_category(ledger, [20], received=received)
    assert only_whales[0].shares["Whale"] == 1.0

    table = CategoryTable([CategoryBand("Big", Fraction(20)), CategoryBand("Small", Fraction(0), Fraction(20))])
    balanced = [rec(10, ZERO_ADDRESS, A, 20 * WEI), rec(10, ZERO_ADDRESS, B, 5 * WEI, log_index=1),
                rec(10, ZERO_ADDRESS, C, 15 * WEI, log_index=2)]
    shares = velocity_shares_by_category(balanced, [20], table=table)[0].shares
    assert shares == {"Big": 0.5, "Small": 0.5}


def test_top_holders():
    ledger = [rec(1, ZERO_ADDRESS, A, 5), rec(2, ZERO_ADDRESS, B, 7), rec(3, B, BURN_ADDRESS, 1)]
    assert top_holders(ledger, 10, 1) == [(B, 6)]
    assert top_holders(ledger, 10, 0) == []
    assert top_holders(ledger, 10, 5) == [(B, 6), (A, 5)]
    assert top_holders(ledger, 10, 5, exclude=[B]) == [(A, 5)]
    assert top_holders(ledger, 1, 5) == [(A, 5)]

    tied = [rec(1, ZERO_ADDRESS, B, 5), rec(2, ZERO_ADDRESS, A, 5)]
    assert top_holders(tied, 10, 2) == [(A, 5), (B, 5)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.randoms(use_true_random=False))
def test_top_holders_ignore_input_order(seed, random):
    records, _ = generate({"seed": seed, "accounts": 8, "transfers": 120})
    shuffled = list(records)
    random.shuffle(shuffled)
    t = records[-1].block
    middle = records[len(records) // 2].block
    for block in (middle, t):
        assert top_holders(sort_records(shuffled), block, 5) == top_holders(records, block, 5)


def test_category_shares_honour_extra_exclusions(mixed_ledger):
    everyone = velocity_shares_by_category(mixed_ledger, [400])[0].shares
    assert everyone["Whale"] > 0
    without_whale = velocity_shares_by_category(mixed_ledger, [400], excluded=[ZERO_ADDRESS, BURN_ADDRESS, A])
    assert without_whale[0].shares["Whale"] == 0.0
    assert sum(without_whale[0].shares.values()) == pytest.approx(1.0, abs=1e-12)


def test_time_index_affine_and_explicit():
    affine = BlockTimeIndex(genesis_block=100, genesis_timestamp=1_000)
    assert affine.timestamp(110) == 1_120
    assert affine.blocks_for_days(1) == BLOCKS_PER_DAY

    explicit = BlockTimeIndex({10: 500, 20: 700})
    assert explicit.timestamp(15) == 500
    assert explicit.timestamp(25) == 700
    with pytest.raises(MissingTimeIndex):
        explicit.timestamp(5)
    with pytest.raises(MissingTimeIndex):
        BlockTimeIndex({10: 700, 20: 500})


def test_smoothing_constant_series_is_unchanged():
    index = BlockTimeIndex()
    points = [(day * BLOCKS_PER_DAY, 42.0) for day in range(10)]
    assert smooth(points, 3, index) == points
    assert smooth([], 3, index) == []


def test_smoothing_step_reaches_half_after_one_day():
    """Daily samples in a closed 3-day window: four samples, two of them after the step"""
    index = BlockTimeIndex()
    step_day = 5
    points = [(day * BLOCKS_PER_DAY, 0.0 if day < step_day else 8.0) for day in range(10)]
    smoothed = dict(smooth(points, 3, index))
    assert smoothed[(step_day - 1) * BLOCKS_PER_DAY] == 0.0
    assert smoothed[step_day * BLOCKS_PER_DAY] == 2.0
    assert smoothed[(step_day + 1) * BLOCKS_PER_DAY] == 4.0
    assert smoothed[(step_day + 3) * BLOCKS_PER_DAY] == 8.0


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(st.integers(-1_000, 1_000), st.integers(-1_000, 1_000)), min_size=1, max_size=30),
    st.integers(-5, 5),
    st.integers(-5, 5),
    st.sampled_from([1, 3, 7]),
)
def test_smoothing_is_linear(pairs, alpha, beta, days):
    index = BlockTimeIndex()
    blocks = [k * BLOCKS_PER_DAY // 2 for k in range(len(pairs))]
    x = list(zip(blocks, [p[0] for p in pairs]))
    y = list(zip(blocks, [p[1] for p in pairs]))
    combined = list(zip(blocks, [alpha * p[0] + beta * p[1] for p in pairs]))
    expected = [alpha * sx + beta * sy for (_, sx), (_, sy) in zip(smooth(x, days, index), smooth(y, days, index))]
    assert [value for _, value in smooth(combined, days, index)] == pytest.approx(expected, abs=1e-6)


def test_balance_series(mixed_ledger):
    schedule = [100, 199, 200, 400]
    [series_a, series_c] = balance_series(mixed_ledger, [A, C], schedule, labels={A: "Pool"})
    assert series_a.label == "Pool"
    assert series_a.points == [(100, 50_000 * WEI), (199, 50_000 * WEI), (200, 49_500 * WEI), (400, 49_500 * WEI)]
    assert series_c.points == [(100, 0), (199, 0), (200, 500 * WEI), (400, 499 * WEI)]
    assert series_a.smoothed is None


def test_balance_series_smoothing_needs_time_index(mixed_ledger):
    with pytest.raises(MissingTimeIndex):
        balance_series(mixed_ledger, [A], [100], smoothing_days=7)
    smoothed = balance_series(mixed_ledger, [A], [100, 400], smoothing_days=7, time_index=BlockTimeIndex())
    assert smoothed[0].window_days == 7
    assert [block for block, _ in smoothed[0].smoothed] == [100, 400]


def test_wrapped_share():
    state = replay([rec(1, ZERO_ADDRESS, WRAPPER, 10)], excluded=())
    assert wrapped_share(state, WRAPPER) == 1.0
    assert wrapped_share(replay([rec(1, ZERO_ADDRESS, A, 10)], excluded=()), WRAPPER) == 0.0

    quarter = replay([
        rec(1, ZERO_ADDRESS, A, 40),
        rec(2, A, BURN_ADDRESS, 8),
        rec(3, A, WRAPPER, 8),
    ], excluded=())
    assert wrapped_share(quarter, WRAPPER) == 0.25
    with pytest.raises(ZeroSupply):
        wrapped_share(LedgerState(), WRAPPER)


def test_wrapped_share_series():
    ledger = [rec(10, ZERO_ADDRESS, A, 100), rec(BLOCKS_PER_DAY, A, WRAPPER, 50)]
    schedule = BlockChunker.sample_blocks(0, 3 * BLOCKS_PER_DAY, BLOCKS_PER_DAY)
    points = wrapped_share_series(ledger, WRAPPER, schedule)
    assert [(p.at_block, p.fraction) for p in points] == [
        (BLOCKS_PER_DAY, 0.5), (2 * BLOCKS_PER_DAY, 0.5), (3 * BLOCKS_PER_DAY, 0.5)
    ]

    smoothed = wrapped_share_series(ledger, WRAPPER, [100, 200], smoothing_days=1, time_index=BlockTimeIndex())
    assert [p.smoothed for p in smoothed] == [0.0, 0.0]
    with pytest.raises(MissingTimeIndex):
        wrapped_share_series(ledger, WRAPPER, [100], smoothing_days=1)
