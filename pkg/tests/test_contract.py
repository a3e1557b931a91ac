import hashlib
import random
from fractions import Fraction
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracechain.contract import (
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
from tracechain.ledger import state_digest
from tracechain.model import Tru

from oracles import EventLogChecker, random_tx

# sha256 of the literal '{"truLookup":{},"activityLookup":{},"msgOrder":0}'
EMPTY_STATE_DIGEST = "3ac9cabc5c8777a5f64a90b5fffd1183aee04694d03d09799a0c500a051f5c86"


def tx(op, **params):
    return SimpleNamespace(op=op, params=params)


def genesis(*ids):
    state = init_contract()
    for i in ids:
        state, _ = create_genesis_tru(state, i)
    return state


def test_init_contract_is_empty():
    state = init_contract()
    assert state.msg_order == 0
    assert dict(state.tru_lookup) == {}
    assert dict(state.activity_lookup) == {}
    assert init_contract() == init_contract()


def test_empty_state_digest_is_pinned():
    literal = b'{"truLookup":{},"activityLookup":{},"msgOrder":0}'
    assert hashlib.sha256(literal).hexdigest() == EMPTY_STATE_DIGEST
    assert state_digest(init_contract()).hex() == EMPTY_STATE_DIGEST


def test_state_lookups_are_read_only():
    state = genesis(1)
    with pytest.raises(TypeError):
        state.tru_lookup[2] = Tru(2)


class TestGenesis:
    def test_creates_fresh_tru(self):
        state, event = create_genesis_tru(init_contract(), 1)
        assert event == Event(0, EventKind.TRU_CREATED, 1)
        assert str(event) == "TruCreated(0,1)"
        assert state.msg_order == 1
        assert state.tru_lookup[1] == Tru(1)

    def test_duplicate_id(self):
        with pytest.raises(Rejection) as info:
            create_genesis_tru(genesis(1), 1)
        assert info.value.guard is Guard.TRU_DOES_NOT_EXIST
        assert info.value.offending_id == 1

    def test_zero_id(self):
        with pytest.raises(Rejection) as info:
            create_genesis_tru(genesis(1, 2), 0)
        assert info.value.guard is Guard.NON_ZERO


class TestRecordActivity:
    def test_mix_scenario_events(self):
        state = genesis(1, 2)
        k = state.msg_order
        state, events = record_activity(state, 10, "mix", [1, 2], [3], Mode.CONSUME_INPUTS)
        assert events == [
            Event(k, EventKind.ACTIVITY_CREATED, 0, 10, "mix"),
            Event(k + 1, EventKind.TRU_CONSUMED, 1, 10, "mix"),
            Event(k + 2, EventKind.TRU_CONSUMED, 2, 10, "mix"),
            Event(k + 3, EventKind.TRU_CREATED, 3, 10, "mix"),
        ]
        assert state.tru_lookup[3].produced_by == 10
        assert state.tru_lookup[1].consumed_by == 10
        activity = state.activity_lookup[10]
        assert activity.input_tru_ids == (1, 2) and activity.output_tru_ids == (3,)

    def test_activity_id_reuse(self):
        state, _ = record_activity(genesis(1, 2), 10, "mix", [1, 2], [3])
        with pytest.raises(Rejection) as info:
            record_activity(state, 10, "again", [3], [4])
        assert info.value.guard is Guard.ACTIVITY_DOES_NOT_EXIST

    def test_consumed_input_rejected_atomically(self):
        state, _ = record_activity(genesis(1, 2), 10, "mix", [1], [3])
        before = state_digest(state)
        with pytest.raises(Rejection) as info:
            record_activity(state, 11, "pack", [2, 1], [4])
        assert info.value.guard is Guard.TRU_AVAILABLE
        assert info.value.offending_id == 1
        assert state_digest(state) == before
        assert 11 not in state.activity_lookup
        assert state.tru_lookup[2].consumed is False

    def test_use_mode(self):
        state, events = record_activity(genesis(5), 12, "inspect", [5], [6], Mode.USE_INPUTS)
        assert events[1] == Event(2, EventKind.TRU_USED, 5, 12, "inspect")
        assert state.tru_lookup[5].used and state.tru_lookup[5].used_by == 12
        assert not state.tru_lookup[5].consumed

    @pytest.mark.parametrize(
        "args, guard, offending",
        [
            ((0, "a", [1], [3]), Guard.NON_ZERO, 0),
            ((10, "a", [9], [3]), Guard.TRU_EXISTS, 9),
            ((10, "a", [0], [3]), Guard.TRU_EXISTS, 0),
            ((10, "a", [1], [2]), Guard.TRU_DOES_NOT_EXIST, 2),
            ((10, "a", [1], [0]), Guard.NON_ZERO, 0),
            ((10, "a", [1, 1], [3]), Guard.TRU_AVAILABLE, 1),
            ((10, "a", [1], [3, 3]), Guard.TRU_DOES_NOT_EXIST, 3),
            ((10, "a", [1], [1]), Guard.TRU_DOES_NOT_EXIST, 1),
            ((10, "a", [1], [2, 0]), Guard.TRU_DOES_NOT_EXIST, 2),
            ((10, 7, [1], [3]), Guard.MALFORMED, 10),
            ((10, "a", [1], [3], "borrow"), Guard.MALFORMED, 10),
            ((10, "a" * 257, [1], [3]), Guard.MALFORMED, 10),
            ((10, "a", [1], [-3]), Guard.MALFORMED, 0),
        ],
    )
    def test_guards(self, args, guard, offending):
        with pytest.raises(Rejection) as info:
            record_activity(genesis(1, 2), *args)
        assert info.value.guard is guard
        assert info.value.offending_id == offending

    def test_inputs_checked_before_outputs(self):
        with pytest.raises(Rejection) as info:
            record_activity(genesis(1, 2), 10, "a", [7], [2])
        assert info.value.guard is Guard.TRU_EXISTS

    def test_name_limit_counts_bytes(self):
        record_activity(genesis(1), 10, "é" * 128, [1], [3])
        with pytest.raises(Rejection):
            record_activity(genesis(1), 10, "é" * 128 + "x", [1], [3])


class TestConsumeAndUse:
    def setup_method(self):
        state, _ = record_activity(genesis(1, 2), 10, "mix", [1, 2], [3])
        state, _ = record_activity(state, 11, "pack", [], [])
        state, _ = create_genesis_tru(state, 5)
        state, _ = record_activity(state, 12, "inspect", [], [])
        self.state = state

    def test_consume(self):
        m = self.state.msg_order
        state, event = consume_tru(self.state, 3, 11)
        assert event == Event(m, EventKind.TRU_CONSUMED, 3, 11, "pack")
        assert state.tru_lookup[3].committed == state.tru_lookup[3].quantity

    def test_consume_twice(self):
        state, _ = consume_tru(self.state, 3, 11)
        with pytest.raises(Rejection) as info:
            consume_tru(state, 3, 11)
        assert info.value.guard is Guard.TRU_AVAILABLE

    def test_consume_unknown_activity(self):
        with pytest.raises(Rejection) as info:
            consume_tru(self.state, 3, 99)
        assert info.value.guard is Guard.PRIMITIVE_ACTIVITY_EXISTS

    def test_use(self):
        m = self.state.msg_order
        state, event = use_tru(self.state, 5, 12)
        assert event == Event(m, EventKind.TRU_USED, 5, 12, "inspect")
        with pytest.raises(Rejection) as info:
            use_tru(state, 5, 12)
        assert info.value.guard is Guard.TRU_AVAILABLE

    def test_use_zero_id(self):
        with pytest.raises(Rejection) as info:
            use_tru(self.state, 0, 12)
        assert info.value.guard is Guard.TRU_EXISTS

    def test_consume_commits_whole_batch(self):
        trus = dict(self.state.tru_lookup)
        trus[5] = Tru(5, quantity=Fraction(7, 2))
        state = ContractState(trus, self.state.activity_lookup, self.state.msg_order)
        state, _ = consume_tru(state, 5, 12)
        assert state.tru_lookup[5].committed == Fraction(7, 2)


class TestApplyTransaction:
    def test_genesis_delegates(self):
        state, events = apply_transaction(init_contract(), tx("genesis", id=1))
        assert [str(e) for e in events] == ["TruCreated(0,1)"]

    def test_unknown_op(self):
        with pytest.raises(Rejection) as info:
            apply_transaction(genesis(1), tx("frobnicate"))
        assert info.value.guard is Guard.MALFORMED

    def test_arity(self):
        with pytest.raises(Rejection) as info:
            apply_transaction(init_contract(), tx("genesis", id=1, name="x"))
        assert info.value.guard is Guard.MALFORMED

    def test_replay_is_deterministic(self):
        rng = random.Random(11)
        state = init_contract()
        checked = 0
        for attempt in range(1, 50_000):
            if attempt % 200 == 0:
                state = init_contract()
            op, params = random_tx(rng)
            try:
                first = apply_transaction(state, tx(op, **params))
            except Rejection:
                continue
            second = apply_transaction(state, tx(op, **params))
            assert state_digest(first[0]) == state_digest(second[0])
            assert first[1] == second[1]
            state = first[0]
            checked += 1
            if checked == 1000:
                break
        assert checked == 1000


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=20, max_value=200))
def test_event_log_checker_agrees(seed, n):
    rng = random.Random(seed)
    state = init_contract()
    log = EventLogChecker()
    events = []
    for _ in range(n):
        op, params = random_tx(rng, tru_space=25, activity_space=15)
        expected = log.check(op, params)
        try:
            state, new = apply_transaction(state, tx(op, **params))
        except Rejection as exc:
            assert expected == (exc.guard.value, exc.offending_id)
            continue
        assert expected is None
        for e in new:
            log.feed(e)
        events.extend(new)
    assert [e.msg_order for e in events] == list(range(state.msg_order))
