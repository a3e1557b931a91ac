"""Traceability ledger: ontology guards as transaction validity rules on a
hash-linked block log, with provenance traces over the recorded history."""

from .contract import (
    ContractState,
    Event,
    EventKind,
    Guard,
    Mode,
    Rejection,
    apply_transaction,
    consume_tru,
    create_genesis_tru,
    init_contract,
    record_activity,
    use_tru,
)
from .ledger import (
    Block,
    Chain,
    CorruptLogError,
    EmptyBlockError,
    Transaction,
    replay,
    state_digest,
    verify_chain,
)
from .model import (
    ActivityState,
    PrimitiveActivity,
    Role,
    Tru,
    UnknownTruError,
    available_amount,
    producer_of,
    tru_is_available,
)
from .trace import TraceNode, TraceReport, forward_trace, primitive_trace, render_trace

__version__ = "0.1.0"
