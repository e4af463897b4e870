"""Structured triplet representation of chart tables.

Every grid position of an :class:`~chartstr.lct.LctTable` becomes one
``(row entity, column entity, value)`` record.  A set of records does not
care about row or column order, which is what makes it a better target for
comparison than the linear CSV text.  Charts with more than two entity axes
use :class:`NTuple` records with ``k`` entity keys.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from .lct import Cell, LctTable

__all__ = [
    "Triplet",
    "NTuple",
    "TripletSet",
    "NTupleSet",
    "StrError",
    "IncompleteGrid",
    "ConflictingDuplicate",
    "InvalidPermutation",
    "ArityMismatch",
    "KEY_SEPARATOR",
    "normalize_entity",
    "canonical_key",
    "to_str",
    "from_str",
    "transpose",
    "permute",
    "serialize_str",
    "parse_str",
]

KEY_SEPARATOR = "\x1f"
_WS_RE = re.compile(r"\s+")


class StrError(ValueError):
    pass


class IncompleteGrid(StrError):
    def __init__(self, missing: Sequence[tuple[str, str]]):
        self.missing = list(missing)
        super().__init__(f"{len(self.missing)} grid position(s) missing, e.g. {self.missing[:3]}")


class ConflictingDuplicate(StrError):
    def __init__(self, position: tuple[str, str]):
        self.position = position
        super().__init__(f"conflicting values at position {position}")


class InvalidPermutation(StrError):
    pass


class ArityMismatch(StrError):
    pass


@dataclass(frozen=True)
class Triplet:
    row_entity: str
    col_entity: str
    value: Cell

    def __post_init__(self) -> None:
        if not isinstance(self.value, Cell):
            object.__setattr__(self, "value", Cell(str(self.value)))
        if not self.row_entity.strip() or not self.col_entity.strip():
            raise ValueError(f"blank entity in triplet {self.entities!r}")

    @property
    def entities(self) -> tuple[str, str]:
        return (self.row_entity, self.col_entity)

    def swapped(self) -> "Triplet":
        return Triplet(self.col_entity, self.row_entity, self.value)


@dataclass(frozen=True)
class NTuple:
    """A k-entity record for high-order charts (multi-charts, 3-D charts)."""

    entities: tuple[str, ...]
    value: Cell

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        if not isinstance(self.value, Cell):
            object.__setattr__(self, "value", Cell(str(self.value)))
        if len(self.entities) < 2:
            raise ValueError("an n-tuple needs at least two entity keys")
        if any(not e.strip() for e in self.entities):
            raise ValueError(f"blank entity in tuple {self.entities!r}")


Record = Union[Triplet, NTuple]


def _signature(rec: Record) -> tuple[tuple[str, ...], str]:
    return (tuple(rec.entities), rec.value.raw)


class _RecordSet:
    """Multiset of records sharing one arity.

    Equality ignores order but counts duplicates, and compares records by
    their entity tuple and raw value, so a 2-ary :class:`NTupleSet` equals
    the :class:`TripletSet` with the same content.
    """

    __slots__ = ("_items", "arity")

    def __init__(self, items: Iterable[Record] = (), arity: int | None = None):
        self._items: tuple[Record, ...] = tuple(items)
        arities = {len(r.entities) for r in self._items}
        if len(arities) > 1:
            raise ArityMismatch(f"mixed arities {sorted(arities)} in one set")
        if arities:
            (found,) = arities
            if arity is not None and arity != found:
                raise ArityMismatch(f"declared arity {arity}, records have {found}")
            arity = found
        self.arity: int = 2 if arity is None else arity

    def __iter__(self) -> Iterator[Record]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def counter(self) -> Counter:
        return Counter(_signature(r) for r in self._items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, _RecordSet):
            return NotImplemented
        return self.counter() == other.counter()

    def __hash__(self) -> int:
        return hash(frozenset(self.counter().items()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self._items)!r})"

    @property
    def items(self) -> tuple[Record, ...]:
        return self._items


class TripletSet(_RecordSet):
    def __init__(self, triplets: Iterable[Triplet] = ()):
        triplets = tuple(triplets)
        for t in triplets:
            if not isinstance(t, Triplet):
                raise TypeError(f"TripletSet holds Triplet records, got {type(t).__name__}")
        super().__init__(triplets, 2)

    @property
    def triplets(self) -> tuple[Triplet, ...]:
        return self._items  # type: ignore[return-value]


class NTupleSet(_RecordSet):
    def __init__(self, tuples: Iterable[NTuple] = (), arity: int | None = None):
        super().__init__(tuples, arity)


def normalize_entity(text: str) -> str:
    """Trim, collapse whitespace runs and lowercase."""
    return _WS_RE.sub(" ", text.strip()).lower()


def canonical_key(rec: Record) -> str:
    """Order-independent comparison key for the entities of a record.

    >>> canonical_key(Triplet("Sales", " Q1 ", Cell("1")))
    'q1\\x1fsales'
    """
    return KEY_SEPARATOR.join(sorted(normalize_entity(e) for e in rec.entities))


def to_str(table: LctTable) -> TripletSet:
    """Expand a table into one triplet per grid position."""
    return TripletSet(
        Triplet(r, c, v)
        for r, row in zip(table.row_entities, table.values)
        for c, v in zip(table.col_entities, row)
    )


def from_str(records: TripletSet) -> LctTable:
    """Rebuild a table from a complete-grid triplet set.

    Rows and columns come out in lexicographic entity order.  Exact duplicate
    triplets collapse onto one position; duplicates with different values
    raise :class:`ConflictingDuplicate`.
    """
    if records.arity != 2:
        raise ArityMismatch(f"cannot lay out arity-{records.arity} records as a table")
    if not records:
        raise IncompleteGrid([])
    grid: dict[tuple[str, str], Cell] = {}
    for t in records:
        pos = (t.entities[0], t.entities[1])
        seen = grid.get(pos)
        if seen is not None and seen.raw != t.value.raw:
            raise ConflictingDuplicate(pos)
        grid[pos] = t.value
    rows = sorted({r for r, _ in grid})
    cols = sorted({c for _, c in grid})
    missing = [(r, c) for r in rows for c in cols if (r, c) not in grid]
    if missing:
        raise IncompleteGrid(missing)
    return LctTable(
        tuple(cols),
        tuple(rows),
        tuple(tuple(grid[(r, c)] for c in cols) for r in rows),
    )


def transpose(table: LctTable) -> LctTable:
    return LctTable(
        table.row_entities,
        table.col_entities,
        tuple(zip(*table.values)),
    )


def _check_perm(perm: Sequence[int], size: int, what: str) -> tuple[int, ...]:
    perm = tuple(perm)
    if sorted(perm) != list(range(size)):
        raise InvalidPermutation(f"{what} permutation {perm} is not a bijection over 0..{size - 1}")
    return perm


def permute(
    table: LctTable,
    row_perm: Sequence[int] | None = None,
    col_perm: Sequence[int] | None = None,
) -> LctTable:
    """Reorder rows and columns; ``result.row_entities[i] == table.row_entities[row_perm[i]]``."""
    n, m = table.shape
    rp = _check_perm(range(n) if row_perm is None else row_perm, n, "row")
    cp = _check_perm(range(m) if col_perm is None else col_perm, m, "column")
    return LctTable(
        tuple(table.col_entities[j] for j in cp),
        tuple(table.row_entities[i] for i in rp),
        tuple(tuple(table.values[i][j] for j in cp) for i in rp),
    )


# -- serialization ---------------------------------------------------------

_NEEDS_QUOTE = re.compile(r'[,()"\r\n]|^\s|\s$|^$')


def _quote_text(s: str) -> str:
    if _NEEDS_QUOTE.search(s):
        return '"' + s.replace('"', '""') + '"'
    return s


def _sorted_records(records: _RecordSet) -> list[Record]:
    return sorted(records, key=_signature)


def serialize_str(records: _RecordSet, format: str = "text") -> str:
    """Render a record set as ``text`` (one ``(a, b, value)`` per line) or ``jsonl``."""
    ordered = _sorted_records(records)
    if format == "text":
        return "".join(
            "(" + ", ".join(_quote_text(s) for s in (*r.entities, r.value.raw)) + ")\n"
            for r in ordered
        )
    if format == "jsonl":
        lines = []
        for r in ordered:
            value: dict = {"raw": r.value.raw}
            if r.value.numeric is not None:
                value["number"] = float(r.value.numeric)
            lines.append(json.dumps({"entities": list(r.entities), "value": value}, ensure_ascii=False))
        return "".join(line + "\n" for line in lines)
    raise ValueError(f"unknown STR format {format!r}")


def _split_text_record(line: str, line_no: int) -> list[str]:
    s = line.strip()
    if not (s.startswith("(") and s.endswith(")")):
        raise StrError(f"line {line_no}: expected '(...)', got {line!r}")
    body = s[1:-1]
    fields: list[str] = []
    i, n = 0, len(body)
    while True:
        while i < n and body[i] == " ":
            i += 1
        if i < n and body[i] == '"':
            i += 1
            buf = []
            while True:
                if i >= n:
                    raise StrError(f"line {line_no}: unterminated quote")
                if body[i] == '"':
                    if i + 1 < n and body[i + 1] == '"':
                        buf.append('"')
                        i += 2
                        continue
                    i += 1
                    break
                buf.append(body[i])
                i += 1
            fields.append("".join(buf))
            while i < n and body[i] == " ":
                i += 1
        else:
            j = body.find(",", i)
            j = n if j < 0 else j
            fields.append(body[i:j].strip())
            i = j
        if i >= n:
            break
        if body[i] != ",":
            raise StrError(f"line {line_no}: unexpected {body[i]!r} after field")
        i += 1
    return fields


def _text_lines(text: str) -> Iterator[tuple[int, str]]:
    """Yield logical lines; a quoted field may span physical lines."""
    buf: list[str] = []
    start = 1
    quotes = 0
    for no, line in enumerate(text.split("\n"), start=1):
        if not buf:
            start = no
        buf.append(line)
        quotes += line.count('"')
        if quotes % 2 == 0:
            joined = "\n".join(buf)
            buf.clear()
            quotes = 0
            if joined.strip():
                yield start, joined
    if buf and "\n".join(buf).strip():
        raise StrError(f"line {start}: unterminated quote")


def _build(records: list[tuple[list[str], str]]) -> _RecordSet:
    if not records:
        return TripletSet()
    arities = {len(e) for e, _ in records}
    if len(arities) > 1:
        raise ArityMismatch(f"mixed arities {sorted(arities)} in one set")
    if arities == {2}:
        return TripletSet(Triplet(e[0], e[1], Cell(v)) for e, v in records)
    return NTupleSet(NTuple(tuple(e), Cell(v)) for e, v in records)


def parse_str(text: str, format: str = "text") -> _RecordSet:
    """Inverse of :func:`serialize_str`.

    Arity-2 input gives a :class:`TripletSet`, anything wider an
    :class:`NTupleSet`.
    """
    records: list[tuple[list[str], str]] = []
    if format == "text":
        for no, line in _text_lines(text):
            fields = _split_text_record(line, no)
            if len(fields) < 3:
                raise StrError(f"line {no}: need at least two entities and a value")
            records.append((fields[:-1], fields[-1]))
    elif format == "jsonl":
        for no, line in enumerate(text.split("\n"), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entities = [str(e) for e in obj["entities"]]
                value = obj["value"]
                raw = value["raw"] if isinstance(value, dict) else str(value)
            except (ValueError, KeyError, TypeError) as exc:
                raise StrError(f"line {no}: bad STR jsonl record ({exc})") from exc
            records.append((entities, raw))
    else:
        raise ValueError(f"unknown STR format {format!r}")
    try:
        return _build(records)
    except ValueError as exc:
        if isinstance(exc, StrError):
            raise
        raise StrError(str(exc)) from exc
