from decimal import Decimal

import pytest
from conftest import FIXTURES
from hypothesis import given
from hypothesis import strategies as st

from chartstr.qa import (
    DuplicateQuestion,
    EmptyBatch,
    QaRecord,
    load_jsonl,
    relaxed_accuracy,
    relaxed_match,
    score_batch,
)


@pytest.mark.parametrize(
    "pred, gold, ok",
    [
        ("10.4", "10", True),
        ("10.6", "10", False),
        ("Paris", "paris", True),
        ("Paris", "Lyon", False),
        (" yes ", "Yes", True),
        ("0", "0", True),
        ("0.001", "0", False),
        ("-10.5", "-10", True),
        ("10", "-10", False),
        ("45%", "45", True),
        ("1,050", "1000", True),
    ],
)
def test_relaxed_match(pred, gold, ok):
    assert relaxed_match(pred, gold) is ok


def test_asymmetry():
    # |100 - 105| = 5; 0.048 * 105 = 5.04 passes, 0.048 * 100 = 4.8 fails
    assert relaxed_match("100", "105", Decimal("0.048"))
    assert not relaxed_match("105", "100", Decimal("0.048"))


def test_float_margin_is_exact():
    assert relaxed_match("105", "100", 0.05)
    assert not relaxed_match("105.001", "100", 0.05)


@given(st.text(max_size=20))
def test_reflexive(x):
    assert relaxed_match(x, x)


def test_five_record_fixture():
    # q1 yes, q2 no, q3 yes, q4 no, q5 yes (2% off) -> 3 / 5
    batch = load_jsonl(open(FIXTURES / "qa_five.jsonl", encoding="utf-8"))
    assert score_batch(batch) == {"count": 5, "correct": 3, "accuracy": 0.6}


def test_accuracy_trivial():
    assert relaxed_accuracy([QaRecord("a", "1", "1"), QaRecord("b", "x", "x")]) == 1.0
    assert relaxed_accuracy([QaRecord("a", "1", "1"), QaRecord("b", "x", "y")]) == 0.5


def test_errors():
    with pytest.raises(EmptyBatch):
        relaxed_accuracy([])
    with pytest.raises(DuplicateQuestion):
        relaxed_accuracy([QaRecord("a", "1", "1"), QaRecord("a", "2", "2")])
    with pytest.raises(ValueError, match="line 2"):
        load_jsonl(['{"question_id": 1, "predicted": "1", "gold": "1"}', '{"question_id": 2}'])
