"""Command-line interface.

The data directory holds ``chain.chain`` (sealed blocks, one per line) and
``pending.txlog`` (accepted transactions not yet sealed). It defaults to
``$TRACECHAIN_DIR`` or ``./.tracechain``.

``scenario`` is meant for a fresh data directory; on a directory that
already holds its ids every step is rejected.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from . import encoding
from .contract import Event, Rejection, event_record
from .ledger import (
    Chain,
    CorruptLogError,
    EmptyBlockError,
    chain_text,
    parse_chain,
    read_txlog,
    replay,
    state_digest,
    txlog_text,
    verify_chain_bytes,
    write_txlog,
)
from .model import UnknownTruError
from .sim import run_simulation, summary
from .trace import Direction, encode_report, render_trace, trace

log = logging.getLogger("tracechain")

CHAIN_FILE = "chain.chain"
PENDING_FILE = "pending.txlog"
ENV_DIR = "TRACECHAIN_DIR"

SCENARIO_START_MS = 1_500_000_000_000
SCENARIO_STEPS = (
    ("genesis", {"id": 1}),
    ("genesis", {"id": 2}),
    ("activity", {"id": 10, "name": "mix", "inputs": [1, 2], "outputs": [3],
                  "mode": "consumeInputs"}),
    ("activity", {"id": 11, "name": "pack", "inputs": [3], "outputs": [4],
                  "mode": "consumeInputs"}),
)
SCENARIO_TRACE_TRU = 4


class CliError(Exception):
    """A command failed for a reason other than a contract rejection."""


class Store:
    """The on-disk chain of one data directory."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.chain_path = data_dir / CHAIN_FILE
        self.pending_path = data_dir / PENDING_FILE

    @property
    def initialized(self) -> bool:
        return self.chain_path.exists()

    def init(self) -> None:
        if self.initialized:
            raise CliError(f"{self.data_dir} is already initialized")
        if self.data_dir.exists() and any(self.data_dir.iterdir()):
            raise CliError(f"{self.data_dir} is not empty")
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.save(Chain())

    def load(self) -> Chain:
        if not self.initialized:
            raise CliError(f"{self.data_dir} is not initialized (run init)")
        blocks, bad = parse_chain(self.chain_path.read_bytes())
        if bad is not None:
            raise CliError(f"chain file unreadable at height {bad}")
        pending = read_txlog(self.pending_path) if self.pending_path.exists() else []
        try:
            return Chain.from_history(blocks, pending)
        except (ValueError, CorruptLogError) as exc:
            raise CliError(f"stored chain does not verify: {exc}") from exc

    def save(self, chain: Chain) -> None:
        self._write(self.chain_path, chain_text(chain.blocks))
        self._write(self.pending_path, txlog_text(tx for tx, _ in chain.pending))

    @staticmethod
    def _write(path: Path, text: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)


def _now_ms(chain: Chain, requested: Optional[int]) -> int:
    if requested is not None:
        return requested
    return max(int(time.time() * 1000), chain.last_timestamp)


def _parse_ids(text: str) -> List[int]:
    if not text:
        return []
    try:
        return [int(part, 10) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated id list: {text!r}") from None


def _print_events(events: Sequence[Event], machine: bool) -> None:
    for event in events:
        print(encoding.dumps(event_record(event)) if machine else str(event))


def _submit(chain: Chain, op: str, params: dict, timestamp: int, machine: bool) -> bool:
    try:
        _, events = chain.submit(op, params, timestamp)
    except Rejection as exc:
        print(str(exc))
        if exc.detail:
            log.info("%s", exc.detail)
        return False
    _print_events(events, machine)
    return True


def cmd_init(args: argparse.Namespace) -> int:
    Store(args.data_dir).init()
    print(f"initialized {args.data_dir}")
    return 0


def cmd_genesis(args: argparse.Namespace) -> int:
    store = Store(args.data_dir)
    chain = store.load()
    ok = _submit(chain, "genesis", {"id": args.id}, _now_ms(chain, args.timestamp),
                 args.format == "machine")
    if ok:
        store.save(chain)
    return 0 if ok else 1


def cmd_activity(args: argparse.Namespace) -> int:
    store = Store(args.data_dir)
    chain = store.load()
    mode = {"consume": "consumeInputs", "use": "useInputs"}.get(args.mode, args.mode)
    params = {"id": args.id, "name": args.name, "inputs": args.inputs,
              "outputs": args.outputs, "mode": mode}
    ok = _submit(chain, "activity", params, _now_ms(chain, args.timestamp),
                 args.format == "machine")
    if ok:
        store.save(chain)
    return 0 if ok else 1


def cmd_seal(args: argparse.Namespace) -> int:
    store = Store(args.data_dir)
    chain = store.load()
    try:
        block = chain.seal_block(_now_ms(chain, args.timestamp))
    except (EmptyBlockError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    store.save(chain)
    print(f"sealed block {block.height} {block.digest.hex()}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    store = Store(args.data_dir)
    if not store.initialized:
        raise CliError(f"{args.data_dir} is not initialized (run init)")
    bad = verify_chain_bytes(store.chain_path.read_bytes())
    if bad is None:
        print("ok")
        return 0
    print(f"bad height {bad}")
    return 1


def cmd_export(args: argparse.Namespace) -> int:
    chain = Store(args.data_dir).load()
    txs = chain.transactions()
    write_txlog(args.logfile, txs)
    print(f"exported {len(txs)} transactions to {args.logfile}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        state, _ = replay(read_txlog(args.logfile))
    except CorruptLogError as exc:
        raise CliError(str(exc)) from exc
    print(state_digest(state).hex())
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    chain = Store(args.data_dir).load()
    try:
        report = trace(chain.tip_state, args.id, Direction(args.direction))
    except UnknownTruError as exc:
        raise CliError(str(exc)) from exc
    if args.export:
        Path(args.export).write_text(encode_report(report) + "\n", encoding="utf-8")
    if args.format == "machine":
        print(encode_report(report))
    else:
        sys.stdout.write(render_trace(report))
    return 0


def cmd_scenario(args: argparse.Namespace) -> int:
    store = Store(args.data_dir)
    if not store.initialized:
        store.init()
    chain = store.load()
    machine = args.format == "machine"
    ts = SCENARIO_START_MS
    ok = True
    for op, params in SCENARIO_STEPS:
        ts = max(ts + 1, chain.last_timestamp)
        ok = _submit(chain, op, params, ts, machine) and ok
    if not ok:
        store.save(chain)
        return 1
    block = chain.seal_block(max(ts + 1, chain.last_timestamp))
    store.save(chain)
    print(f"sealed block {block.height} {block.digest.hex()}")
    report = trace(chain.tip_state, SCENARIO_TRACE_TRU)
    if machine:
        print(encode_report(report))
    else:
        sys.stdout.write(render_trace(report))
    return 0


def cmd_sim(args: argparse.Namespace) -> int:
    if args.nodes < 1:
        raise CliError("need at least one node")
    net = run_simulation(args.nodes, args.blocks, args.seed, tamper=args.tamper)
    sys.stdout.write(summary(net))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracechain", description="Traceability ledger: record, seal, verify and trace.")
    parser.add_argument("--data-dir", type=Path,
                        default=Path(os.environ.get(ENV_DIR, ".tracechain")),
                        help=f"data directory (default ${ENV_DIR} or ./.tracechain)")
    parser.add_argument("--format", choices=("text", "machine"), default="text")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create an empty chain")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("genesis", help="create a TRU with no producer")
    p.add_argument("id", type=int)
    p.add_argument("--timestamp", type=int)
    p.set_defaults(func=cmd_genesis)

    p = sub.add_parser("activity", help="record a primitive activity")
    p.add_argument("id", type=int)
    p.add_argument("name")
    p.add_argument("--in", dest="inputs", type=_parse_ids, default=[])
    p.add_argument("--out", dest="outputs", type=_parse_ids, default=[])
    p.add_argument("--mode", choices=("consume", "use", "consumeInputs", "useInputs"),
                   default="consume")
    p.add_argument("--timestamp", type=int)
    p.set_defaults(func=cmd_activity)

    p = sub.add_parser("seal", help="seal pending transactions into a block")
    p.add_argument("--timestamp", type=int)
    p.set_defaults(func=cmd_seal)

    p = sub.add_parser("verify", help="check digests, links and replay")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="write all accepted transactions to a .txlog")
    p.add_argument("logfile", type=Path)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("replay", help="replay a .txlog and print its state digest")
    p.add_argument("logfile", type=Path)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("trace", help="print the provenance trace of a TRU")
    p.add_argument("id", type=int)
    p.add_argument("--direction", choices=("backward", "forward"), default="backward")
    p.add_argument("--export", type=Path, help="also write the canonical report here")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("scenario", help="run the bundled two-batch mix/pack scenario")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("sim", help="run a seeded replication simulation")
    p.add_argument("nodes", type=int)
    p.add_argument("blocks", type=int)
    p.add_argument("--tamper", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sim)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
