"""Relaxed-accuracy scoring for chart question answering.

Numeric answers may be off by up to 5% of the gold value; everything else
must match exactly after trimming and case folding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Sequence, Union

from .lct import normalize_numeric

__all__ = [
    "QaRecord",
    "EmptyBatch",
    "DuplicateQuestion",
    "relaxed_match",
    "relaxed_accuracy",
    "score_batch",
    "load_jsonl",
]

DEFAULT_MARGIN = Decimal("0.05")


class EmptyBatch(ValueError):
    pass


class DuplicateQuestion(ValueError):
    pass


@dataclass(frozen=True)
class QaRecord:
    question_id: str
    predicted: str
    gold: str


def relaxed_match(
    predicted: str, gold: str, margin: Union[Decimal, float, str] = DEFAULT_MARGIN
) -> bool:
    """True if ``predicted`` answers ``gold`` under the relaxed rule.

    The margin is relative to the gold value, so the test is not symmetric:
    at ``margin=0.048``, ``("100", "105")`` passes and ``("105", "100")``
    fails.
    """
    p = normalize_numeric(predicted)
    g = normalize_numeric(gold)
    if p is not None and g is not None:
        if g == 0:
            return p == 0
        return abs(p - g) <= Decimal(str(margin)) * abs(g)
    return predicted.strip().casefold() == gold.strip().casefold()


def score_batch(batch: Sequence[QaRecord], margin=DEFAULT_MARGIN) -> dict:
    """Summary ``{count, correct, accuracy}`` for a batch."""
    if not batch:
        raise EmptyBatch("no QA records to score")
    seen: set[str] = set()
    for r in batch:
        if r.question_id in seen:
            raise DuplicateQuestion(f"question_id {r.question_id!r} appears twice")
        seen.add(r.question_id)
    correct = sum(relaxed_match(r.predicted, r.gold, margin) for r in batch)
    return {"count": len(batch), "correct": correct, "accuracy": correct / len(batch)}


def relaxed_accuracy(batch: Sequence[QaRecord], margin=DEFAULT_MARGIN) -> float:
    return score_batch(batch, margin)["accuracy"]


def load_jsonl(lines: Iterable[str]) -> list[QaRecord]:
    records = []
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(
                QaRecord(str(obj["question_id"]), str(obj["predicted"]), str(obj["gold"]))
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"line {no}: bad QA record ({exc})") from exc
    return records
