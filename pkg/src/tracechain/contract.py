"""The Trace contract: a guard-checked state machine over TRUs and activities.

Every mutation runs against a private working copy. A guard failure raises
:class:`Rejection` before the copy is frozen, so a rejected transaction
leaves the caller's state untouched and emits nothing, the way a Solidity
``throw`` reverts the whole call.

Guard order follows the declared modifier order of each contract function:

* ``newTru``: ``truDoesNotExist``, ``nonZero``, ``primitiveActivityExists``
* ``consumeTru`` / ``useTru``: ``truExists``, ``truAvailable``,
  ``primitiveActivityExists``
* ``recordActivity``: argument shape (``malformed``), then ``nonZero`` and
  ``activityDoesNotExist`` on the activity id, then each input in list
  order, then each output in list order.

Guards see the effects of earlier steps of the same call. A repeated input
therefore fails ``truAvailable`` and an output that repeats an input or
another output fails ``truDoesNotExist``; no separate shape rule is needed
to keep recorded activity lists duplicate-free and disjoint.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Any, Dict, List, Mapping, Sequence, Tuple

from .encoding import encode_fraction
from .model import (
    MAX_NAME_BYTES,
    NULL_ID,
    PrimitiveActivity,
    Tru,
    is_u64,
    tru_is_available,
)


class Guard(str, enum.Enum):
    NON_ZERO = "nonZero"
    TRU_DOES_NOT_EXIST = "truDoesNotExist"
    TRU_AVAILABLE = "truAvailable"
    TRU_EXISTS = "truExists"
    PRIMITIVE_ACTIVITY_EXISTS = "primitiveActivityExists"
    ACTIVITY_DOES_NOT_EXIST = "activityDoesNotExist"
    MALFORMED = "malformed"


class Rejection(Exception):
    """A transaction failed a guard. Nothing was changed or emitted."""

    def __init__(self, guard: Guard, offending_id: int = 0, detail: str = ""):
        super().__init__(guard, offending_id, detail)
        self.guard = guard
        self.offending_id = offending_id
        self.detail = detail

    def __str__(self) -> str:
        return f"REJECTED {self.guard.value} id={self.offending_id}"


class EventKind(str, enum.Enum):
    TRU_CREATED = "TruCreated"
    TRU_CONSUMED = "TruConsumed"
    TRU_USED = "TruUsed"
    ACTIVITY_CREATED = "ActivityCreated"


class Mode(str, enum.Enum):
    CONSUME_INPUTS = "consumeInputs"
    USE_INPUTS = "useInputs"


@dataclass(frozen=True)
class Event:
    msg_order: int
    kind: EventKind
    tru_id: int = NULL_ID
    activity_id: int = NULL_ID
    activity_name: str = ""

    def __str__(self) -> str:
        if self.kind is EventKind.TRU_CREATED:
            return f"TruCreated({self.msg_order},{self.tru_id})"
        if self.kind is EventKind.ACTIVITY_CREATED:
            return f'ActivityCreated({self.msg_order},{self.activity_id},"{self.activity_name}")'
        return (
            f"{self.kind.value}({self.msg_order},{self.tru_id},"
            f'{self.activity_id},"{self.activity_name}")'
        )


@dataclass(frozen=True)
class ContractState:
    """One snapshot of the contract's world state.

    The lookups are read-only views; operations return fresh snapshots.
    """

    tru_lookup: Mapping[int, Tru]
    activity_lookup: Mapping[int, PrimitiveActivity]
    msg_order: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "tru_lookup", MappingProxyType(dict(self.tru_lookup)))
        object.__setattr__(
            self, "activity_lookup", MappingProxyType(dict(self.activity_lookup))
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContractState):
            return NotImplemented
        return (
            self.msg_order == other.msg_order
            and dict(self.tru_lookup) == dict(other.tru_lookup)
            and dict(self.activity_lookup) == dict(other.activity_lookup)
        )

    __hash__ = None  # type: ignore[assignment]


def init_contract() -> ContractState:
    return ContractState({}, {}, 0)


class _Draft:
    """Mutable working copy of a state; frozen only if every guard passed."""

    def __init__(self, state: ContractState):
        self.trus: Dict[int, Tru] = dict(state.tru_lookup)
        self.activities: Dict[int, PrimitiveActivity] = dict(state.activity_lookup)
        self.msg_order = state.msg_order
        self.events: List[Event] = []

    def freeze(self) -> ContractState:
        return ContractState(self.trus, self.activities, self.msg_order)

    def emit(self, kind: EventKind, tru_id: int = NULL_ID, activity_id: int = NULL_ID,
             name: str = "") -> Event:
        event = Event(self.msg_order, kind, tru_id, activity_id, name)
        self.msg_order += 1
        self.events.append(event)
        return event

    # guards, one per contract modifier

    def non_zero(self, num: int) -> None:
        if num == 0:
            raise Rejection(Guard.NON_ZERO, num)

    def tru_does_not_exist(self, tru_id: int) -> None:
        if tru_id in self.trus:
            raise Rejection(Guard.TRU_DOES_NOT_EXIST, tru_id, "tru already exists")

    def tru_exists(self, tru_id: int) -> None:
        if tru_id not in self.trus:
            raise Rejection(Guard.TRU_EXISTS, tru_id, "tru does not exist")

    def tru_available(self, tru_id: int) -> None:
        if not tru_is_available(self.trus[tru_id]):
            raise Rejection(Guard.TRU_AVAILABLE, tru_id, "tru already consumed or used")

    def primitive_activity_exists(self, activity_id: int) -> None:
        if activity_id not in self.activities:
            raise Rejection(Guard.PRIMITIVE_ACTIVITY_EXISTS, activity_id,
                            "activity does not exist")

    def activity_does_not_exist(self, activity_id: int) -> None:
        if activity_id in self.activities:
            raise Rejection(Guard.ACTIVITY_DOES_NOT_EXIST, activity_id,
                            "activity already exists")

    # contract functions

    def new_tru(self, tru_id: int, activity_id: int = NULL_ID) -> Event:
        self.tru_does_not_exist(tru_id)
        self.non_zero(tru_id)
        name = ""
        if activity_id != NULL_ID:
            self.primitive_activity_exists(activity_id)
            name = self.activities[activity_id].name
        self.trus[tru_id] = Tru(tru_id, produced_by=activity_id)
        return self.emit(EventKind.TRU_CREATED, tru_id, activity_id, name)

    def consume_tru(self, tru_id: int, activity_id: int) -> Event:
        self.tru_exists(tru_id)
        self.tru_available(tru_id)
        self.primitive_activity_exists(activity_id)
        tru = self.trus[tru_id]
        self.trus[tru_id] = replace(
            tru, consumed=True, consumed_by=activity_id, committed=tru.quantity
        )
        return self.emit(EventKind.TRU_CONSUMED, tru_id, activity_id,
                         self.activities[activity_id].name)

    def use_tru(self, tru_id: int, activity_id: int) -> Event:
        self.tru_exists(tru_id)
        self.tru_available(tru_id)
        self.primitive_activity_exists(activity_id)
        tru = self.trus[tru_id]
        self.trus[tru_id] = replace(
            tru, used=True, used_by=activity_id, committed=tru.quantity
        )
        return self.emit(EventKind.TRU_USED, tru_id, activity_id,
                         self.activities[activity_id].name)

    def new_activity(self, activity_id: int, name: str) -> Event:
        self.non_zero(activity_id)
        self.activity_does_not_exist(activity_id)
        # tru lists are attached once every input and output guard has passed
        self.activities[activity_id] = PrimitiveActivity(activity_id, name)
        return self.emit(EventKind.ACTIVITY_CREATED, NULL_ID, activity_id, name)


def _check_id(value: Any, what: str) -> int:
    if not is_u64(value):
        raise Rejection(Guard.MALFORMED, 0, f"{what} is not an unsigned 64-bit integer")
    return value


def _check_activity_args(activity_id: Any, name: Any, inputs: Any, outputs: Any,
                         mode: Any) -> Tuple[int, str, Tuple[int, ...], Tuple[int, ...], Mode]:
    activity_id = _check_id(activity_id, "activity id")
    if not isinstance(name, str):
        raise Rejection(Guard.MALFORMED, activity_id, "name is not a string")
    if len(name.encode("utf-8")) > MAX_NAME_BYTES:
        raise Rejection(Guard.MALFORMED, activity_id,
                        f"name longer than {MAX_NAME_BYTES} bytes")
    if not isinstance(inputs, (list, tuple)) or not isinstance(outputs, (list, tuple)):
        raise Rejection(Guard.MALFORMED, activity_id, "tru lists must be lists")
    ins = tuple(_check_id(t, "input tru id") for t in inputs)
    outs = tuple(_check_id(t, "output tru id") for t in outputs)
    try:
        mode = Mode(mode)
    except ValueError:
        raise Rejection(Guard.MALFORMED, activity_id, f"unknown mode {mode!r}") from None
    return activity_id, name, ins, outs, mode


def create_genesis_tru(state: ContractState, tru_id: int) -> Tuple[ContractState, Event]:
    """Create a TRU with no recorded producer."""
    tru_id = _check_id(tru_id, "tru id")
    draft = _Draft(state)
    event = draft.new_tru(tru_id)
    return draft.freeze(), event


def record_activity(
    state: ContractState,
    activity_id: int,
    name: str,
    inputs: Sequence[int],
    outputs: Sequence[int],
    mode: Mode = Mode.CONSUME_INPUTS,
) -> Tuple[ContractState, List[Event]]:
    """Record a primitive activity that consumes (or uses) ``inputs`` and
    produces fresh TRUs ``outputs``, all or nothing.

    Emits ``ActivityCreated``, then one ``TruConsumed``/``TruUsed`` per
    input, then one ``TruCreated`` per output, each in list order.
    """
    activity_id, name, ins, outs, mode = _check_activity_args(
        activity_id, name, inputs, outputs, mode)
    draft = _Draft(state)
    draft.new_activity(activity_id, name)
    take = draft.consume_tru if mode is Mode.CONSUME_INPUTS else draft.use_tru
    for tru_id in ins:
        take(tru_id, activity_id)
    for tru_id in outs:
        draft.new_tru(tru_id, activity_id)
    draft.activities[activity_id] = PrimitiveActivity(activity_id, name, ins, outs)
    return draft.freeze(), draft.events


def consume_tru(state: ContractState, tru_id: int, activity_id: int) -> Tuple[ContractState, Event]:
    """Mark an existing TRU consumed by an existing activity.

    Internal building block of :func:`record_activity`; exposed for testing.
    """
    draft = _Draft(state)
    event = draft.consume_tru(tru_id, activity_id)
    return draft.freeze(), event


def use_tru(state: ContractState, tru_id: int, activity_id: int) -> Tuple[ContractState, Event]:
    draft = _Draft(state)
    event = draft.use_tru(tru_id, activity_id)
    return draft.freeze(), event


GENESIS_PARAMS = ("id",)
ACTIVITY_PARAMS = ("id", "name", "inputs", "outputs", "mode")


def apply_transaction(state: ContractState, tx: Any) -> Tuple[ContractState, List[Event]]:
    """Dispatch a ledger transaction (anything with ``op`` and ``params``)."""
    params = tx.params
    if not isinstance(params, Mapping):
        raise Rejection(Guard.MALFORMED, 0, "params must be a record")
    if tx.op == "genesis":
        if set(params) != set(GENESIS_PARAMS):
            raise Rejection(Guard.MALFORMED, 0, "genesis takes exactly {id}")
        new_state, event = create_genesis_tru(state, params["id"])
        return new_state, [event]
    if tx.op == "activity":
        if set(params) != set(ACTIVITY_PARAMS):
            raise Rejection(Guard.MALFORMED, 0,
                            "activity takes exactly {id, name, inputs, outputs, mode}")
        return record_activity(state, params["id"], params["name"], params["inputs"],
                               params["outputs"], params["mode"])
    raise Rejection(Guard.MALFORMED, 0, f"unknown op {tx.op!r}")


# canonical records

def tru_record(tru: Tru) -> Dict[str, Any]:
    return {
        "id": tru.id,
        "created": tru.created,
        "used": tru.used,
        "consumed": tru.consumed,
        "producedBy": tru.produced_by,
        "consumedBy": tru.consumed_by,
        "usedBy": tru.used_by,
        "quantity": encode_fraction(tru.quantity),
        "committed": encode_fraction(tru.committed),
    }


def activity_record(activity: PrimitiveActivity) -> Dict[str, Any]:
    return {
        "id": activity.id,
        "created": activity.created,
        "name": activity.name,
        "inputTruIds": list(activity.input_tru_ids),
        "outputTruIds": list(activity.output_tru_ids),
    }


def event_record(event: Event) -> Dict[str, Any]:
    return {
        "msgOrder": event.msg_order,
        "kind": event.kind.value,
        "truId": event.tru_id,
        "activityId": event.activity_id,
        "activityName": event.activity_name,
    }


def event_from_record(record: Mapping[str, Any]) -> Event:
    if tuple(record) != ("msgOrder", "kind", "truId", "activityId", "activityName"):
        raise ValueError("event record fields out of order")
    return Event(record["msgOrder"], EventKind(record["kind"]), record["truId"],
                 record["activityId"], record["activityName"])


def state_record(state: ContractState) -> Dict[str, Any]:
    return {
        "truLookup": {str(k): tru_record(state.tru_lookup[k]) for k in sorted(state.tru_lookup)},
        "activityLookup": {
            str(k): activity_record(state.activity_lookup[k])
            for k in sorted(state.activity_lookup)
        },
        "msgOrder": state.msg_order,
    }
