"""Provenance traces over the contract state.

A backward (primitive) trace walks from a TRU to the activity that produced
it, then to that activity's inputs, down to genesis TRUs. A forward trace
walks from a TRU to the activity that consumed or used it, then to that
activity's outputs.

Trees are built iteratively so that long supply chains do not hit the
interpreter's recursion limit. Identical subtrees are shared rather than
rebuilt; a subtree is only shared if it holds no cycle marker, since cycle
markers depend on the path that reached them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

from . import encoding
from .contract import ContractState
from .ledger import state_digest
from .model import NULL_ID, UnknownTruError


class NodeKind(str, enum.Enum):
    TRU = "tru"
    ACTIVITY = "activity"


class Direction(str, enum.Enum):
    BACKWARD = "backward"
    FORWARD = "forward"


@dataclass(frozen=True)
class TraceNode:
    kind: NodeKind
    id: int
    name: str = ""
    children: Tuple["TraceNode", ...] = ()
    cycle_marker: bool = False


@dataclass(frozen=True)
class TraceReport:
    root: TraceNode
    direction: Direction
    state_digest_at_query: bytes


# (activity id or 0, the activity's name, the tru ids below that activity)
_Step = Callable[[int], Tuple[int, str, Tuple[int, ...]]]


def _backward_step(state: ContractState) -> _Step:
    def step(tru_id: int) -> Tuple[int, str, Tuple[int, ...]]:
        producer = state.tru_lookup[tru_id].produced_by
        activity = state.activity_lookup.get(producer)
        if producer == NULL_ID:
            return NULL_ID, "", ()
        if activity is None:
            return producer, "", ()
        return producer, activity.name, activity.input_tru_ids
    return step


def _forward_step(state: ContractState) -> _Step:
    def step(tru_id: int) -> Tuple[int, str, Tuple[int, ...]]:
        tru = state.tru_lookup[tru_id]
        taker = tru.consumed_by or tru.used_by
        activity = state.activity_lookup.get(taker)
        if taker == NULL_ID:
            return NULL_ID, "", ()
        if activity is None:
            return taker, "", ()
        return taker, activity.name, activity.output_tru_ids
    return step


def _build(state: ContractState, root_id: int, step: _Step) -> TraceNode:
    memo: Dict[int, TraceNode] = {}
    on_path: Set[int] = set()
    # frame: [tru id, activity id, activity name, child ids, next index, built, saw cycle]
    stack: List[list] = []
    result: List[TraceNode] = []

    def enter(tru_id: int) -> Optional[Tuple[TraceNode, bool]]:
        if tru_id in on_path:
            return TraceNode(NodeKind.TRU, tru_id, cycle_marker=True), True
        if tru_id in memo:
            return memo[tru_id], False
        if tru_id not in state.tru_lookup:
            # dangling link in a foreign log; show the id and stop
            return TraceNode(NodeKind.TRU, tru_id), False
        activity_id, name, child_ids = step(tru_id)
        on_path.add(tru_id)
        stack.append([tru_id, activity_id, name, child_ids, 0, [], False])
        return None

    def deliver(node: TraceNode, cyclic: bool) -> None:
        if stack:
            stack[-1][5].append(node)
            stack[-1][6] = stack[-1][6] or cyclic
        else:
            result.append(node)

    done = enter(root_id)
    if done is not None:
        return done[0]
    while stack:
        frame = stack[-1]
        tru_id, activity_id, name, child_ids, index, built, cyclic = frame
        if index < len(child_ids):
            frame[4] += 1
            done = enter(child_ids[index])
            if done is not None:
                deliver(*done)
            continue
        stack.pop()
        on_path.discard(tru_id)
        children: Tuple[TraceNode, ...] = ()
        if activity_id != NULL_ID:
            children = (TraceNode(NodeKind.ACTIVITY, activity_id, name, tuple(built)),)
        node = TraceNode(NodeKind.TRU, tru_id, children=children)
        if not cyclic:
            memo[tru_id] = node
        deliver(node, cyclic)
    return result[0]


def _report(state: ContractState, tru_id: int, direction: Direction) -> TraceReport:
    if tru_id not in state.tru_lookup:
        raise UnknownTruError(tru_id)
    step = _backward_step(state) if direction is Direction.BACKWARD else _forward_step(state)
    return TraceReport(_build(state, tru_id, step), direction, state_digest(state))


def primitive_trace(state: ContractState, tru_id: int) -> TraceReport:
    """Backward provenance tree of ``tru_id``, down to genesis TRUs."""
    return _report(state, tru_id, Direction.BACKWARD)


def forward_trace(state: ContractState, tru_id: int) -> TraceReport:
    """Where-used tree of ``tru_id``."""
    return _report(state, tru_id, Direction.FORWARD)


def trace(state: ContractState, tru_id: int, direction: Direction = Direction.BACKWARD) -> TraceReport:
    return _report(state, tru_id, Direction(direction))


def _walk(root: TraceNode):
    """Depth-first, pre-order (node, depth) pairs."""
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        yield node, depth
        stack.extend((child, depth + 1) for child in reversed(node.children))


def node_ids(report: TraceReport) -> Tuple[Set[int], Set[int]]:
    """The distinct TRU ids and activity ids in a report."""
    trus: Set[int] = set()
    activities: Set[int] = set()
    seen: Set[int] = set()
    stack = [report.root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        (trus if node.kind is NodeKind.TRU else activities).add(node.id)
        stack.extend(node.children)
    return trus, activities


def render_trace(report: TraceReport) -> str:
    lines = []
    for node, depth in _walk(report.root):
        if node.kind is NodeKind.TRU:
            label = f"TRU {node.id}"
        else:
            label = f'ACTIVITY {node.id} "{node.name}"'
        if node.cycle_marker:
            label += " (cycle)"
        lines.append("  " * depth + label)
    lines.append(
        f"-- trace of TRU {report.root.id}, state {report.state_digest_at_query.hex()[:8]} --"
    )
    return "\n".join(lines) + "\n"


def node_record(node: TraceNode) -> Dict[str, Any]:
    return {
        "kind": node.kind.value,
        "id": node.id,
        "name": node.name,
        "children": [node_record(c) for c in node.children],
        "cycleMarker": node.cycle_marker,
    }


def report_record(report: TraceReport) -> Dict[str, Any]:
    return {
        "root": node_record(report.root),
        "direction": report.direction.value,
        "stateDigestAtQuery": report.state_digest_at_query.hex(),
    }


def encode_report(report: TraceReport) -> str:
    return encoding.dumps(report_record(report))


def _node_from_record(record: Dict[str, Any]) -> TraceNode:
    if tuple(record) != ("kind", "id", "name", "children", "cycleMarker"):
        raise ValueError("trace node fields missing or out of order")
    return TraceNode(NodeKind(record["kind"]), record["id"], record["name"],
                     tuple(_node_from_record(c) for c in record["children"]),
                     record["cycleMarker"])


def decode_report(text: str) -> TraceReport:
    record = encoding.loads(text)
    if tuple(record) != ("root", "direction", "stateDigestAtQuery"):
        raise ValueError("trace report fields missing or out of order")
    return TraceReport(_node_from_record(record["root"]), Direction(record["direction"]),
                       encoding.parse_hexdigest(record["stateDigestAtQuery"]))
