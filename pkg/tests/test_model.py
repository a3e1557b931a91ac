from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracechain.contract import create_genesis_tru, init_contract, record_activity
from tracechain.model import (
    PrimitiveActivity,
    Tru,
    UnknownTruError,
    available_amount,
    boolean_available_amount,
    producer_of,
    tru_is_available,
)


def test_available_when_neither_flag_set():
    assert tru_is_available(Tru(1)) is True


def test_unavailable_when_consumed():
    assert tru_is_available(Tru(1, consumed=True, consumed_by=10)) is False


def test_unavailable_when_used():
    assert tru_is_available(Tru(1, used=True, used_by=10)) is False


@pytest.mark.parametrize(
    "tru, expected",
    [
        (Tru(1), Fraction(1)),
        (Tru(1, quantity=Fraction(100), committed=Fraction(30)), Fraction(70)),
        (Tru(1, consumed=True, consumed_by=4, quantity=Fraction(5)), Fraction(0)),
    ],
)
def test_available_amount(tru, expected):
    assert available_amount(tru) == expected


def test_tru_rejects_inconsistent_links():
    with pytest.raises(ValueError):
        Tru(1, consumed=True)
    with pytest.raises(ValueError):
        Tru(1, used_by=3)
    with pytest.raises(ValueError):
        Tru(1, quantity=Fraction(1), committed=Fraction(2))


def test_activity_lists_must_be_clean():
    with pytest.raises(ValueError):
        PrimitiveActivity(1, "a", (2, 2), ())
    with pytest.raises(ValueError):
        PrimitiveActivity(1, "a", (2,), (2,))
    with pytest.raises(ValueError):
        PrimitiveActivity(1, "a", (0,), ())
    with pytest.raises(ValueError):
        PrimitiveActivity(1, "é" * 129)


def test_producer_of():
    state, _ = create_genesis_tru(init_contract(), 1)
    state, _ = record_activity(state, 10, "mix", [1], [3])
    assert producer_of(state, 1) is None
    assert producer_of(state, 3) == 10
    with pytest.raises(UnknownTruError):
        producer_of(state, 999)


flags = st.sampled_from([(False, False), (True, False), (False, True)])


@given(flags)
def test_boolean_model_is_quantity_model_on_unit_batches(flag_pair):
    consumed, used = flag_pair
    committed = Fraction(1) if (consumed or used) else Fraction(0)
    tru = Tru(
        7,
        consumed=consumed,
        consumed_by=3 if consumed else 0,
        used=used,
        used_by=3 if used else 0,
        committed=committed,
    )
    assert available_amount(tru) == boolean_available_amount(tru)
    assert tru_is_available(tru) == (available_amount(tru) > 0)


@given(
    st.fractions(min_value=0, max_value=1000),
    st.fractions(min_value=0, max_value=1),
)
def test_available_amount_never_negative(quantity, share):
    tru = Tru(1, quantity=quantity, committed=quantity * share)
    assert 0 <= available_amount(tru) <= quantity
