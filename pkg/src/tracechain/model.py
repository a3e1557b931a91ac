"""Domain vocabulary: traceable resource units, primitive activities and
availability arithmetic.

Everything here is a frozen value with pure predicates over it. Quantities
are :class:`fractions.Fraction` so that no floating point ever reaches
consensus-relevant state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Optional, Tuple

if TYPE_CHECKING:
    from .contract import ContractState

NULL_ID = 0
MAX_ID = 2**64 - 1
MAX_NAME_BYTES = 256


class UnknownTruError(KeyError):
    """Raised when a query names a TRU id that was never created."""

    def __init__(self, tru_id: int):
        super().__init__(tru_id)
        self.tru_id = tru_id

    def __str__(self) -> str:
        return f"unknown tru {self.tru_id}"


def is_valid_id(value: object) -> bool:
    """True for a strictly positive unsigned 64-bit integer."""
    return type(value) is int and 0 < value <= MAX_ID


def is_u64(value: object) -> bool:
    return type(value) is int and 0 <= value <= MAX_ID


@dataclass(frozen=True)
class Tru:
    """A traceable resource unit: one batch of something.

    Link fields hold ``0`` when there is no link. ``quantity`` and
    ``committed`` default to the boolean model (a whole batch of size 1,
    nothing reserved).
    """

    id: int
    created: bool = True
    used: bool = False
    consumed: bool = False
    produced_by: int = NULL_ID
    consumed_by: int = NULL_ID
    used_by: int = NULL_ID
    quantity: Fraction = Fraction(1)
    committed: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.quantity < 0 or self.committed < 0:
            raise ValueError("quantity and committed must be non-negative")
        if self.committed > self.quantity:
            raise ValueError("committed exceeds quantity")
        if self.consumed != (self.consumed_by != NULL_ID):
            raise ValueError("consumed flag and consumed_by disagree")
        if self.used != (self.used_by != NULL_ID):
            raise ValueError("used flag and used_by disagree")


@dataclass(frozen=True)
class PrimitiveActivity:
    id: int
    name: str
    input_tru_ids: Tuple[int, ...] = ()
    output_tru_ids: Tuple[int, ...] = ()
    created: bool = True

    def __post_init__(self) -> None:
        ins, outs = self.input_tru_ids, self.output_tru_ids
        if len(set(ins)) != len(ins) or len(set(outs)) != len(outs):
            raise ValueError("activity tru lists must be duplicate-free")
        if set(ins) & set(outs):
            raise ValueError("activity inputs and outputs overlap")
        if NULL_ID in ins or NULL_ID in outs:
            raise ValueError("activity tru lists may not contain the null id")
        if len(self.name.encode("utf-8")) > MAX_NAME_BYTES:
            raise ValueError(f"activity name longer than {MAX_NAME_BYTES} bytes")


class Role(str, enum.Enum):
    PRODUCE = "produce"
    CONSUME = "consume"
    USE = "use"


@dataclass(frozen=True)
class ActivityState:
    """The enabling of a produce/consume/use relation at a point in time."""

    role: Role
    activity: int
    tru: int
    enabled_at: int


def tru_is_available(tru: Tru) -> bool:
    return not (tru.consumed or tru.used)


def available_amount(tru: Tru) -> Fraction:
    """Amount of the batch not yet committed to a use or consume state."""
    if tru.consumed:
        return Fraction(0)
    return tru.quantity - tru.committed


def boolean_available_amount(tru: Tru) -> Fraction:
    """The quantity model restricted to {0, 1}: a whole batch, committed
    entirely once either flag is set."""
    committed = 1 if (tru.consumed or tru.used) else 0
    return Fraction(1 - committed)


def producer_of(state: "ContractState", tru_id: int) -> Optional[int]:
    tru = state.tru_lookup.get(tru_id)
    if tru is None:
        raise UnknownTruError(tru_id)
    return tru.produced_by or None
