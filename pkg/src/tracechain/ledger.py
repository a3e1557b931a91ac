"""Append-only, hash-linked block log over contract transactions.

A :class:`Chain` has one writer. Accepted transactions sit in ``pending``
until :meth:`Chain.seal_block` moves them into a block whose digest covers
its height, timestamp, the previous block's digest, the transactions, the
events they emitted and the digest of the resulting contract state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from . import encoding
from .contract import (
    ACTIVITY_PARAMS,
    GENESIS_PARAMS,
    ContractState,
    Event,
    Guard,
    Mode,
    Rejection,
    apply_transaction,
    event_from_record,
    event_record,
    init_contract,
    state_record,
)
from .model import ActivityState, Role, is_u64

log = logging.getLogger(__name__)

_TX_FIELDS = ("seq", "timestamp", "op", "params")
_BLOCK_FIELDS = ("height", "timestamp", "prevDigest", "txs", "events", "stateDigest", "digest")


class CorruptLogError(Exception):
    """A persisted transaction log does not replay cleanly."""

    def __init__(self, seq: int, reason: str):
        super().__init__(seq, reason)
        self.seq = seq
        self.reason = reason

    def __str__(self) -> str:
        return f"corrupt log at seq {self.seq}: {self.reason}"


class EmptyBlockError(Exception):
    """Nothing pending to seal (empty blocks are allowed only at height 0)."""


@dataclass(frozen=True)
class Transaction:
    seq: int
    timestamp: int
    op: str
    params: Mapping[str, Any]


def _params_record(op: str, params: Mapping[str, Any]) -> Dict[str, Any]:
    order = {"genesis": GENESIS_PARAMS, "activity": ACTIVITY_PARAMS}[op]
    record = {name: params[name] for name in order}
    if op == "activity":
        record["inputs"] = list(record["inputs"])
        record["outputs"] = list(record["outputs"])
        record["mode"] = Mode(record["mode"]).value
    return record


def tx_record(tx: Transaction) -> Dict[str, Any]:
    return {
        "seq": tx.seq,
        "timestamp": tx.timestamp,
        "op": tx.op,
        "params": _params_record(tx.op, tx.params),
    }


def encode_tx(tx: Transaction) -> str:
    return encoding.dumps(tx_record(tx))


def tx_from_record(record: Any) -> Transaction:
    if not isinstance(record, dict) or tuple(record) != _TX_FIELDS:
        raise ValueError("transaction fields missing or out of order")
    if not (is_u64(record["seq"]) and is_u64(record["timestamp"])):
        raise ValueError("seq and timestamp must be unsigned integers")
    op, params = record["op"], record["params"]
    order = {"genesis": GENESIS_PARAMS, "activity": ACTIVITY_PARAMS}.get(op)
    if order is None or not isinstance(params, dict) or tuple(params) != order:
        raise ValueError("transaction params missing or out of order")
    return Transaction(record["seq"], record["timestamp"], op, params)


def decode_tx(line: str) -> Transaction:
    tx = tx_from_record(encoding.loads(line))
    if encode_tx(tx) != line:
        raise ValueError("transaction is not canonically encoded")
    return tx


def state_digest(state: ContractState) -> bytes:
    """SHA-256 of the canonical state encoding."""
    return encoding.sha256(encoding.dumps(state_record(state)))


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    prev_digest: bytes
    txs: Tuple[Transaction, ...]
    events: Tuple[Event, ...]
    state_digest: bytes
    digest: bytes = field(default=b"")

    def body_record(self) -> Dict[str, Any]:
        return {
            "height": self.height,
            "timestamp": self.timestamp,
            "prevDigest": self.prev_digest.hex(),
            "txs": [tx_record(tx) for tx in self.txs],
            "events": [event_record(e) for e in self.events],
            "stateDigest": self.state_digest.hex(),
        }

    def compute_digest(self) -> bytes:
        return encoding.sha256(encoding.dumps(self.body_record()))


def encode_block(block: Block) -> str:
    record = block.body_record()
    record["digest"] = block.digest.hex()
    return encoding.dumps(record)


def decode_block(line: str) -> Block:
    """Parse one chain line. Anything but the exact canonical bytes fails."""
    record = encoding.loads(line)
    if not isinstance(record, dict) or tuple(record) != _BLOCK_FIELDS:
        raise ValueError("block fields missing or out of order")
    block = Block(
        height=record["height"],
        timestamp=record["timestamp"],
        prev_digest=encoding.parse_hexdigest(record["prevDigest"]),
        txs=tuple(tx_from_record(r) for r in record["txs"]),
        events=tuple(event_from_record(r) for r in record["events"]),
        state_digest=encoding.parse_hexdigest(record["stateDigest"]),
        digest=encoding.parse_hexdigest(record["digest"]),
    )
    if encode_block(block) != line:
        raise ValueError("block is not canonically encoded")
    return block


class Chain:
    """Sealed blocks, the tip state, and accepted-but-unsealed transactions."""

    def __init__(self) -> None:
        self.blocks: List[Block] = []
        self.tip_state: ContractState = init_contract()
        self.pending: List[Tuple[Transaction, List[Event]]] = []
        self._next_seq = 0
        self._last_timestamp = 0

    @property
    def height(self) -> int:
        """Number of sealed blocks."""
        return len(self.blocks)

    @property
    def last_timestamp(self) -> int:
        return self._last_timestamp

    @property
    def tip_digest(self) -> bytes:
        return self.blocks[-1].digest if self.blocks else encoding.ZERO_DIGEST

    def transactions(self) -> List[Transaction]:
        """Every accepted transaction in seq order, sealed or not."""
        txs = [tx for block in self.blocks for tx in block.txs]
        txs.extend(tx for tx, _ in self.pending)
        return txs

    def events(self) -> List[Event]:
        events = [e for block in self.blocks for e in block.events]
        for _, evs in self.pending:
            events.extend(evs)
        return events

    def submit(self, op: str, params: Mapping[str, Any], timestamp: int) -> Tuple[int, List[Event]]:
        """Validate and apply a transaction; returns ``(seq, events)``.

        Raises :class:`Rejection` and leaves the chain untouched on failure.
        """
        if not is_u64(timestamp):
            raise Rejection(Guard.MALFORMED, 0, "timestamp must be an unsigned integer")
        if timestamp < self._last_timestamp:
            raise Rejection(Guard.MALFORMED, 0,
                            f"timestamp {timestamp} precedes {self._last_timestamp}")
        tx = Transaction(self._next_seq, timestamp, op, params)
        state, events = apply_transaction(self.tip_state, tx)
        tx = Transaction(tx.seq, timestamp, op, _params_record(op, tx.params))
        self.tip_state = state
        self.pending.append((tx, events))
        self._next_seq += 1
        self._last_timestamp = timestamp
        return tx.seq, events

    def seal_block(self, timestamp: int) -> Block:
        if not self.pending and self.blocks:
            raise EmptyBlockError(f"nothing pending to seal at height {self.height}")
        if not is_u64(timestamp) or timestamp < self._last_timestamp:
            raise ValueError(f"block timestamp {timestamp} precedes {self._last_timestamp}")
        block = Block(
            height=self.height,
            timestamp=timestamp,
            prev_digest=self.tip_digest,
            txs=tuple(tx for tx, _ in self.pending),
            events=tuple(e for _, evs in self.pending for e in evs),
            state_digest=state_digest(self.tip_state),
        )
        block = _with_digest(block)
        self.blocks.append(block)
        self.pending.clear()
        self._last_timestamp = timestamp
        return block

    def append_block(self, block: Block) -> None:
        """Append a block produced elsewhere after checking it fully against
        this chain's tip. Raises ``ValueError`` and changes nothing if the
        block does not verify."""
        if self.pending:
            raise ValueError("cannot append a foreign block over pending transactions")
        state, reason = _check_block(block, self.height, self.tip_digest, self.tip_state,
                                     self._next_seq, self._last_timestamp)
        if reason is not None:
            raise ValueError(f"block {block.height} rejected: {reason}")
        self.blocks.append(block)
        self.tip_state = state
        self._next_seq += len(block.txs)
        self._last_timestamp = block.timestamp

    @classmethod
    def from_history(cls, blocks: Iterable[Block], pending: Iterable[Transaction] = ()) -> "Chain":
        """Rebuild a chain by verifying ``blocks`` and replaying ``pending``."""
        chain = cls()
        for block in blocks:
            chain.append_block(block)
        for tx in pending:
            if tx.seq != chain._next_seq:
                raise CorruptLogError(tx.seq, f"expected seq {chain._next_seq}")
            try:
                chain.submit(tx.op, tx.params, tx.timestamp)
            except Rejection as exc:
                raise CorruptLogError(tx.seq, str(exc)) from exc
        return chain


def _with_digest(block: Block) -> Block:
    return Block(block.height, block.timestamp, block.prev_digest, block.txs, block.events,
                 block.state_digest, block.compute_digest())


def _check_block(block: Block, height: int, prev_digest: bytes, state: ContractState,
                 next_seq: int, last_timestamp: int) -> Tuple[ContractState, Optional[str]]:
    """Check one block against the chain position it claims. Returns the
    post-state and ``None``, or the unchanged state and a reason."""
    if block.height != height:
        return state, f"height {block.height} at position {height}"
    if block.prev_digest != prev_digest:
        return state, "broken link to previous block"
    if block.digest != block.compute_digest():
        return state, "digest mismatch"
    if block.timestamp < last_timestamp:
        return state, "block timestamp goes backwards"
    post = state
    events: List[Event] = []
    ts = last_timestamp
    for offset, tx in enumerate(block.txs):
        if tx.seq != next_seq + offset:
            return state, f"seq {tx.seq} out of order"
        if tx.timestamp < ts or tx.timestamp > block.timestamp:
            return state, f"tx {tx.seq} timestamp out of order"
        ts = tx.timestamp
        try:
            post, evs = apply_transaction(post, tx)
        except Rejection as exc:
            return state, f"tx {tx.seq} rejected on replay: {exc}"
        events.extend(evs)
    if tuple(events) != block.events:
        return state, "recorded events differ from replay"
    if state_digest(post) != block.state_digest:
        return state, "state digest differs from replay"
    return post, None


def verify_chain(chain: Union[Chain, Sequence[Block]]) -> Optional[int]:
    """Recompute every digest and link and replay every transaction.

    Returns ``None`` when the chain is intact, otherwise the lowest height
    at which it is inconsistent.
    """
    blocks = chain.blocks if isinstance(chain, Chain) else chain
    state = init_contract()
    prev = encoding.ZERO_DIGEST
    seq = 0
    ts = 0
    for height, block in enumerate(blocks):
        state, reason = _check_block(block, height, prev, state, seq, ts)
        if reason is not None:
            log.debug("verify failed at height %d: %s", height, reason)
            return height
        prev = block.digest
        seq += len(block.txs)
        ts = block.timestamp
    return None


def replay(txs: Iterable[Transaction]) -> Tuple[ContractState, List[Event]]:
    """Fold a persisted, accepted-only transaction log from the empty state."""
    state = init_contract()
    events: List[Event] = []
    last_ts = 0
    for index, tx in enumerate(txs):
        if tx.seq != index:
            raise CorruptLogError(tx.seq, f"expected seq {index}")
        if tx.timestamp < last_ts:
            raise CorruptLogError(tx.seq, "timestamp goes backwards")
        try:
            state, evs = apply_transaction(state, tx)
        except Rejection as exc:
            raise CorruptLogError(tx.seq, str(exc)) from exc
        events.extend(evs)
        last_ts = tx.timestamp
    return state, events


def activity_states(txs: Iterable[Transaction]) -> List[ActivityState]:
    """The produce/consume/use states enabled by an accepted log, stamped
    with the enabling transaction's timestamp."""
    states = []
    for tx in txs:
        if tx.op != "activity":
            continue
        p = tx.params
        role = Role.CONSUME if Mode(p["mode"]) is Mode.CONSUME_INPUTS else Role.USE
        states.extend(ActivityState(role, p["id"], t, tx.timestamp) for t in p["inputs"])
        states.extend(ActivityState(Role.PRODUCE, p["id"], t, tx.timestamp) for t in p["outputs"])
    return states


# file formats

def txlog_text(txs: Iterable[Transaction]) -> str:
    return "".join(encode_tx(tx) + "\n" for tx in txs)


def chain_text(blocks: Iterable[Block]) -> str:
    return "".join(encode_block(b) + "\n" for b in blocks)


def _split_lines(data: bytes) -> List[bytes]:
    if not data:
        return []
    lines = data.split(b"\n")
    # a well-formed file ends with a newline; a missing one taints the last line
    if lines[-1] == b"":
        lines.pop()
    else:
        lines[-1] += b"\x00"
    return lines


def parse_txlog(data: bytes) -> List[Transaction]:
    txs = []
    for index, raw in enumerate(_split_lines(data)):
        try:
            txs.append(decode_tx(raw.decode("utf-8")))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptLogError(index, f"unreadable transaction: {exc}") from exc
    return txs


def parse_chain(data: bytes) -> Tuple[List[Block], Optional[int]]:
    """Decode a chain file. Returns the blocks read before the first
    unreadable line, and that line's height (``None`` if all were read)."""
    blocks = []
    for height, raw in enumerate(_split_lines(data)):
        try:
            blocks.append(decode_block(raw.decode("utf-8")))
        except (ValueError, KeyError, TypeError) as exc:
            log.debug("unreadable block at height %d: %s", height, exc)
            return blocks, height
    return blocks, None


def verify_chain_bytes(data: bytes) -> Optional[int]:
    """First bad height of an encoded chain file, or ``None`` if intact."""
    blocks, bad = parse_chain(data)
    found = verify_chain(blocks)
    if found is not None:
        return found
    return bad


def write_txlog(path: Union[str, Path], txs: Iterable[Transaction]) -> None:
    Path(path).write_text(txlog_text(txs), encoding="utf-8")


def read_txlog(path: Union[str, Path]) -> List[Transaction]:
    return parse_txlog(Path(path).read_bytes())


def write_chain(path: Union[str, Path], blocks: Iterable[Block]) -> None:
    Path(path).write_text(chain_text(blocks), encoding="utf-8")
