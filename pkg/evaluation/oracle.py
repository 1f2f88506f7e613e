"""
Brute-force reference for balances, spending stacks and velocities.

Written independently of baseline.velocity: every query replays the ledger
from the first record and evaluates the holding-time sums with exact
fractions.
"""
from fractions import Fraction
from typing import Dict, Iterable, List

from baseline.errors import EmptyAccount, InsufficientBalance, ZeroSupply

NULL_ACCOUNT = "0x0000000000000000000000000000000000000000"
BURN_ACCOUNT = "0xd15a672319cf0352560ee76d9e89eab0889046d3"


def oracle_balances(ledger: Iterable, t: int) -> Dict[str, int]:
    """Inflows minus outflows per account over records at blocks <= t."""
    totals: Dict[str, int] = {}
    for record in ledger:
        if record.block > t:
            continue
        totals[record.to_address] = totals.get(record.to_address, 0) + record.value
        totals[record.from_address] = totals.get(record.from_address, 0) - record.value
    return {account: amount for account, amount in totals.items() if amount and account != NULL_ACCOUNT}


def oracle_stacks(ledger: Iterable, t: int) -> Dict[str, List[List[int]]]:
    """
    Every account's lots as [received_block, amount], oldest first.

    Spending walks the list from its newest end.
    """
    lots: Dict[str, List[List[int]]] = {}
    for record in ledger:
        if record.block > t:
            continue
        if record.value == 0 or record.from_address == record.to_address:
            continue
        if record.from_address != NULL_ACCOUNT:
            owned = lots.get(record.from_address, [])
            needed = record.value
            position = len(owned) - 1
            while needed > 0:
                if position < 0:
                    raise InsufficientBalance(
                        f"{record.from_address} cannot cover {record.value} at block {record.block}"
                    )
                taken = min(needed, owned[position][1])
                owned[position][1] -= taken
                needed -= taken
                position -= 1
            lots[record.from_address] = [lot for lot in owned if lot[1] > 0]
        lots.setdefault(record.to_address, []).append([record.block, record.value])
    return {account: owned for account, owned in lots.items() if owned}


def _weighted_age_sum(owned: List[List[int]], t: int) -> Fraction:
    total = Fraction(0)
    for received, amount in owned:
        age = t - received
        if age < 1:
            age = 1
        total += Fraction(amount, age)
    return total


def oracle_velocity(ledger: Iterable, a: str, t: int) -> float:
    """Velocity of one account at block t from a fresh replay."""
    owned = oracle_stacks(list(ledger), t).get(a, [])
    money = sum(amount for _, amount in owned)
    if money == 0:
        raise EmptyAccount(f"{a} holds nothing at block {t}")
    return float(_weighted_age_sum(owned, t) / money)


def oracle_global_velocity(
    ledger: Iterable,
    t: int,
    excluded: Iterable[str] = (NULL_ACCOUNT, BURN_ACCOUNT),
) -> float:
    """Money-weighted velocity over all accounts outside `excluded`."""
    skip = set(excluded)
    weighted = Fraction(0)
    money = 0
    for account, owned in oracle_stacks(list(ledger), t).items():
        if account in skip:
            continue
        weighted += _weighted_age_sum(owned, t)
        money += sum(amount for _, amount in owned)
    if money == 0:
        raise ZeroSupply(f"nothing held at block {t}")
    return float(weighted / money)


def oracle_velocities(ledger: Iterable, t: int) -> Dict[str, float]:
    """Velocity of every holder at block t from a single replay."""
    result = {}
    for account, owned in oracle_stacks(list(ledger), t).items():
        money = sum(amount for _, amount in owned)
        result[account] = float(_weighted_age_sum(owned, t) / money)
    return result
