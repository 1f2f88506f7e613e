from decimal import Decimal
from fractions import Fraction
from pathlib import Path
import sys

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from baseline.errors import DuplicateKey, LedgerError, MissingState, UnorderedInput, ZeroPool
from baseline.ledger.ledger import ZERO_ADDRESS, Denomination, LidoStateSnapshot, make_transfer
from baseline.shares.shares import (
    Provenance,
    StateSeries,
    conversion_rate,
    reconstruct,
    shares_to_tokens,
    supply_series,
    tokens_to_shares,
)

A = "0x" + "0" * 38 + "aa"
B = "0x" + "0" * 38 + "bb"


def pool(block, pooled, shares):
    return LidoStateSnapshot(block, 0, 0, 0, pooled, shares)


def tokens(block, log_index, sender, recipient, value):
    return make_transfer(block, log_index, sender, recipient, value, Denomination.TOKENS)


def shares(block, log_index, sender, recipient, value):
    return make_transfer(block, log_index, sender, recipient, value, Denomination.SHARES)


def test_conversion_examples():
    """amount=100 at 500 shares / 1000 pooled converts to 50 shares and back to 100"""
    state = pool(1, 1000, 500)
    assert tokens_to_shares(100, state) == 50
    assert shares_to_tokens(50, state) == 100
    assert tokens_to_shares(0, state) == 0
    assert shares_to_tokens(0, state) == 0
    assert tokens_to_shares(7, pool(1, 2, 3)) == 10
    assert shares_to_tokens(500, state) == 1000


def test_tokens_to_shares_rejects_empty_pool():
    with pytest.raises(ZeroPool):
        tokens_to_shares(1, pool(1, 0, 100))


@given(
    st.integers(min_value=1, max_value=2**200),
    st.integers(min_value=1, max_value=2**200),
    st.integers(min_value=0, max_value=2**200),
)
@settings(max_examples=500)
def test_roundtrip_loss_is_below_one_share_value(pooled, total_shares, amount):
    amount = amount % (pooled + 1)
    state = pool(1, pooled, total_shares)
    back = shares_to_tokens(tokens_to_shares(amount, state), state)
    assert back <= amount
    # loss < pooled/total_shares + 1 base unit
    assert (amount - back) * total_shares < pooled + total_shares


def test_roundtrip_loss_bound_over_many_draws():
    """10^5 seeded draws with 256-bit magnitudes"""
    rng = np.random.Generator(np.random.Philox(7))
    for _ in range(100_000):
        pooled = int.from_bytes(rng.bytes(25), "big") + 1
        total_shares = int.from_bytes(rng.bytes(25), "big") + 1
        amount = int.from_bytes(rng.bytes(25), "big") % (pooled + 1)
        state = pool(1, pooled, total_shares)
        back = shares_to_tokens(tokens_to_shares(amount, state), state)
        assert 0 <= amount - back and (amount - back) * total_shares < pooled + total_shares


def test_state_series_lookup_is_a_step_function():
    states = StateSeries([pool(20, 2, 1), pool(10, 1, 1)])
    assert states.lookup(10).block == 10
    assert states.lookup(19).block == 10
    assert states.lookup(25).block == 20
    assert (states.first_block, states.last_block) == (10, 20)
    with pytest.raises(MissingState):
        states.lookup(9)
    with pytest.raises(DuplicateKey):
        StateSeries([pool(10, 1, 1), pool(10, 2, 2)])


def test_reconstruct_empty_inputs():
    ledger = reconstruct([], [], StateSeries())
    assert len(ledger) == 0
    assert ledger.cutover_block is None


def test_reconstruct_unit_rate():
    states = StateSeries([pool(1, 5000, 5000)])
    ledger = reconstruct([tokens(3, 0, ZERO_ADDRESS, A, 1000)], [], states)
    assert [r.value for r in ledger] == [1000]
    assert ledger.provenance == (Provenance.RECONSTRUCTED,)
    assert ledger.transfers[0].denomination is Denomination.SHARES


@pytest.fixture
def cutover_inputs():
    states = StateSeries([pool(0, 1000, 500), pool(4, 3000, 1000)])
    token_records = [
        tokens(1, 0, ZERO_ADDRESS, A, 999),
        tokens(2, 4, A, B, 333),
        tokens(4, 1, A, B, 7),
        tokens(5, 0, A, B, 11),
        tokens(6, 0, B, A, 13),
    ]
    native = [shares(5, 1, A, B, 3), shares(7, 0, B, A, 2)]
    return token_records, native, states


def test_reconstruct_across_cutover(cutover_inputs):
    """Token records before the first native block are converted, native records kept"""
    token_records, native, states = cutover_inputs
    ledger = reconstruct(token_records, native, states)

    assert ledger.cutover_block == 5
    assert len(ledger) == 3 + len(native)
    assert ledger.count(Provenance.RECONSTRUCTED) == 3
    assert ledger.count(Provenance.NATIVE_EVENT) == 2
    for record, provenance in ledger.with_provenance():
        if provenance is Provenance.RECONSTRUCTED:
            assert record.block < ledger.cutover_block
        else:
            assert record.block >= ledger.cutover_block

    # arbitrary-precision recomputation with the end-of-block snapshot
    expected = [
        int(Fraction(999) * Fraction(500, 1000)),
        int(Fraction(333) * Fraction(500, 1000)),
        int(Fraction(7) * Fraction(1000, 3000)),
        3,
        2,
    ]
    assert [r.value for r in ledger] == expected


def test_reconstruct_parallel_matches_serial(cutover_inputs):
    token_records, native, states = cutover_inputs
    serial = reconstruct(token_records, native, states)
    parallel = reconstruct(token_records, native, states, workers=4, chunk_size=1)
    assert parallel == serial


def test_reconstruct_rejects_bad_inputs():
    states = StateSeries([pool(0, 0, 0)])
    with pytest.raises(ZeroPool):
        reconstruct([tokens(1, 0, ZERO_ADDRESS, A, 1)], [], states)
    with pytest.raises(UnorderedInput):
        reconstruct([tokens(2, 0, ZERO_ADDRESS, A, 1), tokens(1, 0, ZERO_ADDRESS, A, 1)], [], states)
    with pytest.raises(LedgerError):
        reconstruct([], [tokens(1, 0, ZERO_ADDRESS, A, 1)], states)
    with pytest.raises(MissingState):
        reconstruct([tokens(1, 0, ZERO_ADDRESS, A, 1)], [], StateSeries([pool(5, 1, 1)]))


def test_supply_series_echoes_snapshot_and_tracks_rate():
    states = StateSeries([pool(10, 100, 100), pool(20, 200, 100)])
    ledger = [shares(10, 0, ZERO_ADDRESS, A, 60), shares(15, 0, ZERO_ADDRESS, B, 40)]
    points = supply_series(states, ledger, [10, 20])

    assert (points[0].total_shares, points[0].total_pooled_ether) == (100, 100)
    assert points[0].conversion_rate == Decimal(1)
    assert points[1].conversion_rate == Decimal("0.5")
    assert [p.ledger_minted_shares for p in points] == [60, 100]


def test_conversion_rate_blank_for_empty_pool():
    assert conversion_rate(pool(1, 0, 0)) is None
    assert conversion_rate(pool(1, 3, 1)).quantize(Decimal("1e-20")) == Decimal("0.33333333333333333333")
