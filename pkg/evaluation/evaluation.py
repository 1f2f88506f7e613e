import logging
import math
from typing import Any, Dict, List, Optional, Sequence

from baseline.ledger.ledger import Denomination, TransferRecord, total_pooled_ether
from baseline.shares.shares import StateSeries, reconstruct
from baseline.velocity.velocity import Scope, VelocitySample, iter_states, sample_series
from evaluation.oracle import oracle_balances, oracle_global_velocity, oracle_velocities
from evaluation.synthetic import GeneratorConfig, generate, make_generator_config
from utils.chunkers import BlockChunker

logger = logging.getLogger(__name__)

VELOCITY_TOLERANCE = 1e-12
SCALE_TOLERANCE = 1e-15
SCALE_FACTOR = 7
SHARD_COUNTS = (1, 2, 8)
SAMPLES_PER_LEDGER = 8

CHECKS = (
    "oracle_equivalence",
    "conservation",
    "weighted_identity",
    "scale_invariance",
    "shard_determinism",
    "reconstruction_roundtrip",
)


def _relative(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def ledger_config(seed: int, index: int, accounts: int, transfers: int) -> GeneratorConfig:
    """Generator settings for the index-th selfcheck ledger; knobs rotate with the index."""
    return make_generator_config(
        seed=(seed + index) % 2**64,
        accounts=accounts,
        transfers=transfers,
        block_span=max(1, transfers * 10),
        rebase_period=max(1, transfers * 2),
        whale_fraction=(0.0, 0.3, 0.6)[index % 3],
        burn_fraction=(0.0, 0.05)[index % 2],
        mint_fraction=(0.2, 0.5)[index % 2],
    )


def _schedule(config: GeneratorConfig) -> List[int]:
    stride = max(1, config.block_span // SAMPLES_PER_LEDGER)
    return BlockChunker.sample_blocks(config.start_block, config.end_block, stride)


def check_oracle_equivalence(records: Sequence[TransferRecord], schedule: Sequence[int]) -> Dict[str, Any]:
    samples = sample_series(records, schedule, scope=Scope.ALL)
    worst = 0.0
    compared = 0
    expected_by_block = {t: oracle_velocities(records, t) for t in schedule}
    for sample in samples:
        if sample.is_global:
            expected = oracle_global_velocity(records, sample.at_block)
        else:
            expected = expected_by_block[sample.at_block][sample.scope]
        worst = max(worst, _relative(sample.velocity, expected))
        compared += 1
    return {"passed": worst < VELOCITY_TOLERANCE, "max_deviation": worst, "compared": compared}


def check_conservation(records: Sequence[TransferRecord], schedule: Sequence[int]) -> Dict[str, Any]:
    failures = []
    for t, state in iter_states(records, schedule, excluded=()):
        if state.total_balance() != state.minted:
            failures.append(t)
        elif sum(oracle_balances(records, t).values()) != state.minted:
            failures.append(t)
    return {"passed": not failures, "failed_blocks": failures}


def check_weighted_identity(samples: Sequence[VelocitySample]) -> Dict[str, Any]:
    """Global velocity against sum(M_i V_i) / sum(M_i) over the account samples."""
    by_block: Dict[int, List[VelocitySample]] = {}
    for sample in samples:
        by_block.setdefault(sample.at_block, []).append(sample)
    worst = 0.0
    for block_samples in by_block.values():
        global_samples = [s for s in block_samples if s.is_global]
        if not global_samples:
            continue
        accounts = [s for s in block_samples if not s.is_global]
        money = sum(s.money for s in accounts)
        recomputed = math.fsum(s.money * s.velocity for s in accounts) / money
        worst = max(worst, _relative(global_samples[0].velocity, recomputed))
    return {"passed": worst < VELOCITY_TOLERANCE, "max_deviation": worst}


def check_scale_invariance(
    records: Sequence[TransferRecord],
    schedule: Sequence[int],
    baseline_samples: Sequence[VelocitySample],
) -> Dict[str, Any]:
    scaled = sample_series([r.scaled(SCALE_FACTOR) for r in records], schedule, scope=Scope.ALL)
    if len(scaled) != len(baseline_samples):
        return {"passed": False, "max_deviation": None, "detail": "sample sets differ"}
    worst = max((_relative(a.velocity, b.velocity) for a, b in zip(baseline_samples, scaled)), default=0.0)
    return {"passed": worst <= SCALE_TOLERANCE, "max_deviation": worst}


def check_shard_determinism(
    records: Sequence[TransferRecord],
    schedule: Sequence[int],
    baseline_samples: Sequence[VelocitySample],
) -> Dict[str, Any]:
    mismatched = [
        n for n in SHARD_COUNTS[1:]
        if sample_series(records, schedule, scope=Scope.ALL, shard_count=n) != list(baseline_samples)
    ]
    return {"passed": not mismatched, "mismatched_shard_counts": mismatched}


def check_reconstruction_roundtrip(
    share_records: Sequence[TransferRecord],
    token_records: Sequence[TransferRecord],
    states: StateSeries,
) -> Dict[str, Any]:
    """shares -> tokens -> shares loses less than one token's worth of shares plus one unit."""
    rebuilt = reconstruct(token_records, [], states)
    if len(rebuilt) != len(share_records):
        return {"passed": False, "detail": "record count changed"}
    worst = 0
    for original, converted in zip(share_records, rebuilt.transfers):
        loss = original.value - converted.value
        snapshot = states.lookup(original.block)
        pooled = total_pooled_ether(snapshot)
        if loss < 0 or loss * pooled > snapshot.total_shares + pooled:
            return {"passed": False, "detail": f"loss {loss} at {original.key}"}
        worst = max(worst, loss)
    return {"passed": True, "max_loss": worst}


def run_selfcheck(
    seed: int = 0,
    ledgers: int = 20,
    accounts: int = 20,
    transfers: int = 500,
    checks: Optional[Sequence[str]] = None,
) -> Dict[str, Any]:
    """
    Run the built-in property suite over seeded synthetic ledgers.

    Args:
        seed: Seed of the first ledger; ledger i uses seed + i
        ledgers: Number of ledgers
        accounts: Accounts per ledger
        transfers: Transfers per ledger
        checks: Subset of CHECKS to run (all when None)

    Returns:
        Dict containing:
            - results: one entry per (ledger, check) with a passed flag
            - summary: totals and pass rate
    """
    selected = list(checks or CHECKS)
    unknown = set(selected) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")

    results = []
    for index in range(ledgers):
        config = ledger_config(seed, index, accounts, transfers)
        records, states = generate(config)
        schedule = _schedule(config)
        samples = sample_series(records, schedule, scope=Scope.ALL)

        for check in selected:
            if check == "oracle_equivalence":
                outcome = check_oracle_equivalence(records, schedule)
            elif check == "conservation":
                outcome = check_conservation(records, schedule)
            elif check == "weighted_identity":
                outcome = check_weighted_identity(samples)
            elif check == "scale_invariance":
                outcome = check_scale_invariance(records, schedule, samples)
            elif check == "shard_determinism":
                outcome = check_shard_determinism(records, schedule, samples)
            else:
                token_records, _ = generate(config.model_copy(update={"denomination": Denomination.TOKENS}))
                outcome = check_reconstruction_roundtrip(records, token_records, states)
            if not outcome["passed"]:
                logger.warning(f"Ledger {index} (seed {config.seed}) failed {check}: {outcome}")
            results.append({"check": check, "ledger": index, "seed": config.seed, **outcome})

    total_tests = len(results)
    passed_tests = sum(1 for r in results if r["passed"])
    summary = {
        "total": total_tests,
        "passed": passed_tests,
        "failed": total_tests - passed_tests,
        "pass_rate": (passed_tests / total_tests) * 100 if total_tests else 100.0,
        "algorithm": "philox",
    }
    return {"results": results, "summary": summary}
