import argparse
from pathlib import Path
import sys
import time
from typing import Any, Dict, List, Optional

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from baseline.errors import InvalidConfig, LedgerError
from baseline.ledger.ledger import STETH_ADDRESS
from baseline.pipeline import VelocityPipeline
from baseline.velocity.velocity import Scope
from evaluation.evaluation import run_selfcheck
from evaluation.synthetic import dump_dataset, make_generator_config
from ingestion.rpc import Checkpoint, JsonRpcClient, export_logs, export_state
from utils.config import RunConfig, TokenKind, load_run_config, resolve_rpc_endpoint
from utils.file_loaders import write_rows
from utils.logger import RunLogger
from utils.utils import configure_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

SELFCHECK_COLUMNS = ["check", "ledger", "seed", "passed", "max_deviation"]


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_options() -> argparse.ArgumentParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--log-dir", help="Directory for JSONL run logs")
    common.add_argument("--output-dir", help="Directory for output CSVs")
    common.add_argument("--out", help="Output file (overrides the default name in --output-dir)")
    common.add_argument("--seed", type=int, help="Seed for synthetic generation")
    return common


def _ledger_options() -> argparse.ArgumentParser:
    ledger = CliParser(add_help=False)
    ledger.add_argument("--transfers", help="Transfer CSV (tokens, shares or wstETH per --token-kind)")
    ledger.add_argument("--shares", help="Native TransferShares CSV (steth-tokens only)")
    ledger.add_argument("--states", help="Lido state CSV")
    ledger.add_argument("--received", help="Token transfer CSV used for categorization")
    ledger.add_argument("--token-kind", choices=[k.value for k in TokenKind])
    ledger.add_argument("--start", type=int, help="First sample block")
    ledger.add_argument("--end", type=int, help="Last sample block (always sampled)")
    ledger.add_argument("--stride", type=int, help="Blocks between samples")
    ledger.add_argument("--window", type=int, help="Averaging window in blocks")
    ledger.add_argument("--window-stride", type=int, help="Blocks between window starts")
    ledger.add_argument("--category-table", help="CSV name,lower,upper in whole tokens")
    ledger.add_argument("--labels", help="CSV address,label[,exclude]")
    ledger.add_argument("--time-index", help="CSV block_number,timestamp")
    ledger.add_argument("--seconds-per-block", type=float)
    ledger.add_argument("--genesis-block", type=int)
    ledger.add_argument("--genesis-timestamp", type=int)
    ledger.add_argument("--shards", type=int, help="Account shards used during replay")
    ledger.add_argument("--workers", type=int, help="Threads for reconstruction")
    ledger.add_argument("--exclude", action="append", help="Address left out of velocity and top holders")
    ledger.add_argument("--smoothing-days", type=float)
    ledger.add_argument("--top-n", type=int)
    ledger.add_argument("--wsteth", help="wstETH contract address")
    ledger.add_argument("--burn", help="Burning address")
    return ledger


def _fetch_options() -> argparse.ArgumentParser:
    fetch = CliParser(add_help=False)
    fetch.add_argument("--rpc", help="JSON-RPC endpoint (falls back to LST_RPC_URL)")
    fetch.add_argument("--contract", default=STETH_ADDRESS)
    fetch.add_argument("--start", type=int, default=0)
    fetch.add_argument("--end", type=int, help="Last block, the chain head when omitted")
    fetch.add_argument("--checkpoint", help="Checkpoint file for resuming")
    fetch.add_argument("--concurrency", type=int, default=4)
    return fetch


def build_parser() -> CliParser:
    parser = CliParser(prog="lst-velocity", description="Token velocity analytics for stETH and wstETH ledgers")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common, ledger, fetch = _common_options(), _ledger_options(), _fetch_options()

    subparsers.add_parser("reconstruct", parents=[common, ledger], help="Token transfers to a share ledger")

    velocity = subparsers.add_parser("velocity", parents=[common, ledger], help="Velocity sample series")
    velocity.add_argument("--scope", choices=[s.value for s in Scope], default=Scope.GLOBAL.value)
    velocity.add_argument("--account", action="append", help="Restrict per-account samples")

    subparsers.add_parser("decompose", parents=[common, ledger], help="Velocity shares by category")

    balances = subparsers.add_parser("balances", parents=[common, ledger], help="Balance series and top holders")
    balances.add_argument("--account", action="append", help="Accounts to trace (top holders when omitted)")

    subparsers.add_parser("wrapped-share", parents=[common, ledger], help="Share of supply held by wstETH")
    subparsers.add_parser("supply", parents=[common, ledger], help="Total shares, pooled ether and rate")

    logs = subparsers.add_parser("fetch-logs", parents=[common, fetch], help="Fetch transfer logs over JSON-RPC")
    logs.add_argument("--event", default="Transfer", help="Transfer, TransferShares, a signature or a topic hash")
    logs.add_argument("--page-size", type=int, default=2_000)

    state = subparsers.add_parser("fetch-state", parents=[common, fetch], help="Fetch historical Lido state")
    state.add_argument("--stride", type=int, default=7_200)

    selfcheck = subparsers.add_parser("selfcheck", parents=[common], help="Run the oracle suite on synthetic ledgers")
    selfcheck.add_argument("--ledgers", type=int, default=20)
    selfcheck.add_argument("--accounts", type=int, default=20)
    selfcheck.add_argument("--transfers", dest="transfer_count", type=int, default=500)

    generate = subparsers.add_parser("generate", parents=[common], help="Write a synthetic ledger and state series")
    generate.add_argument("--accounts", type=int)
    generate.add_argument("--transfers", dest="transfer_count", type=int)
    generate.add_argument("--start-block", type=int)
    generate.add_argument("--block-span", type=int)
    generate.add_argument("--mint-fraction", type=float)
    generate.add_argument("--whale-fraction", type=float)
    generate.add_argument("--burn-fraction", type=float)
    generate.add_argument("--reward-ppm", type=int)
    generate.add_argument("--rebase-period", type=int)
    generate.add_argument("--denomination", choices=["tokens", "shares"])
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    def get(name):
        return getattr(args, name, None)

    return {
        "transfers_path": get("transfers"),
        "shares_path": get("shares"),
        "states_path": get("states"),
        "received_path": get("received"),
        "token_kind": get("token_kind"),
        "schedule": {
            "start": get("start"),
            "end": get("end"),
            "stride": get("stride"),
            "window": get("window"),
            "window_stride": get("window_stride"),
        },
        "category_table_path": get("category_table"),
        "labels_path": get("labels"),
        "time_index": {
            "path": get("time_index"),
            "seconds_per_block": get("seconds_per_block"),
            "genesis_block": get("genesis_block"),
            "genesis_timestamp": get("genesis_timestamp"),
        },
        "output_dir": get("output_dir"),
        "log_dir": get("log_dir"),
        "shard_count": get("shards"),
        "workers": get("workers"),
        "seed": get("seed"),
        "rpc_endpoint": get("rpc"),
        "exclude": get("exclude"),
        "smoothing_days": get("smoothing_days"),
        "top_n": get("top_n"),
        "wsteth_address": get("wsteth"),
        "burn_address": get("burn"),
    }


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = _overrides(args)
    # fetch commands use --start/--end for the block range, not the sample schedule
    if args.command in ("fetch-logs", "fetch-state"):
        overrides["schedule"] = {}
    return load_run_config(args.config, overrides)


def _print_paths(paths) -> None:
    for path in paths if isinstance(paths, list) else [paths]:
        print(path)


def _pipeline_command(args: argparse.Namespace, config: RunConfig) -> int:
    pipeline = VelocityPipeline(config)
    if args.command == "reconstruct":
        _print_paths(pipeline.run_reconstruct(args.out))
    elif args.command == "velocity":
        _print_paths(pipeline.run_velocity(Scope(args.scope), args.account, args.out))
    elif args.command == "decompose":
        _print_paths(pipeline.run_decompose(args.out))
    elif args.command == "balances":
        _print_paths(pipeline.run_balances(args.account, args.out))
    elif args.command == "wrapped-share":
        _print_paths(pipeline.run_wrapped_share(args.out))
    else:
        _print_paths(pipeline.run_supply(args.out))
    return EXIT_OK


def _fetch_command(args: argparse.Namespace, config: RunConfig) -> int:
    started = time.perf_counter()
    client = JsonRpcClient(resolve_rpc_endpoint(config.rpc_endpoint))
    checkpoint = Checkpoint(args.checkpoint) if args.checkpoint else None
    if args.command == "fetch-logs":
        out = Path(args.out) if args.out else config.output_dir / "transfers.csv"
        written = export_logs(client, out, args.contract, args.event, args.start, args.end,
                              args.page_size, checkpoint, args.concurrency, config.event_topics)
    else:
        out = Path(args.out) if args.out else config.output_dir / "states.csv"
        written = export_state(client, out, args.contract, args.start, args.end,
                               args.stride, checkpoint, args.concurrency)
    RunLogger(str(config.log_dir)).log_run(
        command=args.command,
        parameters={"contract": args.contract, "start": args.start, "end": args.end},
        records=written,
        outputs=[str(out)],
        elapsed=time.perf_counter() - started,
    )
    _print_paths(out)
    return EXIT_OK


def _selfcheck_command(args: argparse.Namespace, config: RunConfig) -> int:
    started = time.perf_counter()
    report = run_selfcheck(config.seed, args.ledgers, args.accounts, args.transfer_count)
    out = Path(args.out) if args.out else config.output_dir / "selfcheck.csv"
    write_rows(out, SELFCHECK_COLUMNS, (
        [r["check"], r["ledger"], r["seed"], r["passed"], r.get("max_deviation")] for r in report["results"]
    ))
    summary = report["summary"]
    RunLogger(str(config.log_dir)).log_run(
        command="selfcheck",
        parameters={"seed": config.seed, "ledgers": args.ledgers, "accounts": args.accounts,
                    "transfers": args.transfer_count},
        outputs=[str(out)],
        elapsed=time.perf_counter() - started,
        extra=summary,
    )
    print(f"Total Tests: {summary['total']}")
    print(f"Passed Tests: {summary['passed']}")
    print(f"Pass Rate: {summary['pass_rate']:.1f}%")
    return EXIT_OK if summary["failed"] == 0 else EXIT_DATA


def _generate_command(args: argparse.Namespace, config: RunConfig) -> int:
    started = time.perf_counter()
    settings = {
        name: getattr(args, name)
        for name in ("accounts", "start_block", "block_span", "mint_fraction", "whale_fraction",
                     "burn_fraction", "reward_ppm", "rebase_period", "denomination")
        if getattr(args, name) is not None
    }
    if args.transfer_count is not None:
        settings["transfers"] = args.transfer_count
    generator_config = make_generator_config(seed=config.seed, **settings)
    paths = dump_dataset(generator_config, config.output_dir)
    RunLogger(str(config.log_dir)).log_run(
        command="generate",
        parameters=generator_config.model_dump(mode="json"),
        records=generator_config.transfers,
        outputs=[str(p) for p in paths.values()],
        elapsed=time.perf_counter() - started,
    )
    _print_paths(list(paths.values()))
    return EXIT_OK


def cli(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one subcommand and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    configure_logging(args.log_level)
    try:
        config = _run_config(args)
        if args.command in ("fetch-logs", "fetch-state"):
            return _fetch_command(args, config)
        if args.command == "selfcheck":
            return _selfcheck_command(args, config)
        if args.command == "generate":
            return _generate_command(args, config)
        return _pipeline_command(args, config)
    except InvalidConfig as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except LedgerError as e:
        message = " ".join(str(e).split())
        print(f"error: {type(e).__name__}: {message}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
