"""Linearized CSV Tokens: the flat comma-separated text form of a chart table.

A table looks like::

    none,Q1,Q2
    Sales,10,20
    Cost,4,9

The first line holds the column header entities (the top-left token is
``none`` or empty), every following line holds a row header entity and the
row's values.  Fields that contain commas, quotes or line breaks are
double-quoted with RFC-4180 rules.  The two-character sequence ``/n`` is
accepted as a line separator when the text contains no real line breaks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterator, Optional, Sequence

__all__ = [
    "Cell",
    "LctTable",
    "LctError",
    "EmptyInput",
    "MissingHeader",
    "RaggedRow",
    "normalize_numeric",
    "parse_lct",
    "serialize_lct",
]


class LctError(ValueError):
    """Base class for LCT parse failures."""


class EmptyInput(LctError):
    pass


class MissingHeader(LctError):
    pass


class RaggedRow(LctError):
    def __init__(self, line_no: int, expected: int, got: int):
        self.line_no = line_no
        self.expected = expected
        self.got = got
        super().__init__(f"line {line_no}: expected {expected} fields, got {got}")


_CURRENCY = "$€£"
_NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_GROUPED_RE = re.compile(r"[+-]?\d{1,3}(?:,\d{3})+(?:\.\d*)?")


def normalize_numeric(raw: str) -> Optional[Decimal]:
    """Interpret a cell string as a number, or return None.

    Strips surrounding whitespace, one currency symbol ($, €, £), a trailing
    percent sign and thousands separators.  ``"45%"`` is 45, not 0.45.
    """
    s = raw.strip()
    if s.endswith("%"):
        s = s[:-1].rstrip()
    sign = ""
    if s[:1] in "+-" and s[1:2] in _CURRENCY and s[1:2]:
        sign, s = s[0], s[1:]
    if s[:1] in _CURRENCY and s[:1]:
        s = s[1:].lstrip()
    s = sign + s
    if "," in s:
        if not _GROUPED_RE.fullmatch(s):
            return None
        s = s.replace(",", "")
    if not _NUMBER_RE.fullmatch(s):
        return None
    try:
        return Decimal(s)
    except InvalidOperation:  # pragma: no cover - regex already guards
        return None


@dataclass(frozen=True)
class Cell:
    """One table value: the verbatim string plus its numeric reading."""

    raw: str
    numeric: Optional[Decimal] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "numeric", normalize_numeric(self.raw))

    @property
    def is_numeric(self) -> bool:
        return self.numeric is not None

    def __str__(self) -> str:
        return self.raw


@dataclass(frozen=True)
class LctTable:
    """A rectangular chart table with row and column header entities."""

    col_entities: tuple[str, ...]
    row_entities: tuple[str, ...]
    values: tuple[tuple[Cell, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "col_entities", tuple(self.col_entities))
        object.__setattr__(self, "row_entities", tuple(self.row_entities))
        object.__setattr__(
            self,
            "values",
            tuple(tuple(c if isinstance(c, Cell) else Cell(c) for c in row) for row in self.values),
        )
        if not self.col_entities or not self.row_entities:
            raise ValueError("table needs at least one row and one column")
        if len(self.values) != len(self.row_entities):
            raise ValueError(
                f"{len(self.row_entities)} row entities but {len(self.values)} value rows"
            )
        m = len(self.col_entities)
        for i, row in enumerate(self.values):
            if len(row) != m:
                raise ValueError(f"value row {i} has {len(row)} cells, expected {m}")

    @classmethod
    def from_rows(
        cls,
        col_entities: Sequence[str],
        rows: Sequence[tuple[str, Sequence[str]]],
    ) -> "LctTable":
        """Build a table from ``(row_entity, [raw cells])`` pairs."""
        return cls(
            tuple(col_entities),
            tuple(r for r, _ in rows),
            tuple(tuple(Cell(v) for v in cells) for _, cells in rows),
        )

    @property
    def shape(self) -> tuple[int, int]:
        """(N rows, M columns)."""
        return len(self.row_entities), len(self.col_entities)

    @property
    def empty_cells(self) -> list[tuple[int, int]]:
        """Grid positions whose raw value is the empty string."""
        return [
            (n, m)
            for n, row in enumerate(self.values)
            for m, cell in enumerate(row)
            if cell.raw == ""
        ]


def _records(text: str) -> Iterator[tuple[int, list[str]]]:
    """Split text into (line number, fields) records.

    Lenient RFC-4180 reading: a stray quote inside an unquoted field is kept
    literally, characters after a closing quote are appended, and an
    unterminated quoted field runs to end of input.  Blank and
    whitespace-only lines are skipped.
    """
    slash_n = "\n" not in text and "\r" not in text
    fields: list[str] = []
    buf: list[str] = []
    in_quotes = False
    at_field_start = True
    touched = False
    quoted = False
    line = 1
    start_line = 1
    i = 0
    n = len(text)

    def end_record():
        fields.append("".join(buf))
        rec = list(fields)
        fields.clear()
        buf.clear()
        return rec

    while i < n:
        ch = text[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                in_quotes = False
            else:
                if ch == "\n" or (ch == "\r" and text[i + 1 : i + 2] != "\n"):
                    line += 1
                buf.append(ch)
            i += 1
            continue
        if ch == '"' and at_field_start:
            in_quotes = True
            quoted = True
            at_field_start = False
            touched = True
            i += 1
            continue
        if ch == ",":
            fields.append("".join(buf))
            buf.clear()
            at_field_start = True
            touched = True
            i += 1
            continue
        if ch in "\r\n" or (slash_n and ch == "/" and text[i + 1 : i + 2] == "n"):
            step = 2 if (ch == "\r" and text[i + 1 : i + 2] == "\n") or ch == "/" else 1
            if ch == "/":
                # " /n " is one separator; the spaces are layout
                while buf and buf[-1] in " \t":
                    buf.pop()
                while i + step < n and text[i + step] in " \t":
                    step += 1
            if touched and (fields or quoted or "".join(buf).strip()):
                yield start_line, end_record()
            else:
                buf.clear()
            i += step
            line += 1
            start_line = line
            at_field_start = True
            touched = False
            quoted = False
            continue
        buf.append(ch)
        at_field_start = False
        touched = True
        i += 1
    if touched and (fields or quoted or "".join(buf).strip()):
        yield start_line, end_record()


def parse_lct(text: str) -> LctTable:
    """Parse LCT text into an :class:`LctTable`.

    Raises:
        EmptyInput: no content, or a header with no data rows.
        MissingHeader: the first line has fewer than two fields.
        RaggedRow: a data line with the wrong number of fields.
    """
    if not text or not text.strip():
        raise EmptyInput("empty LCT input")
    records = _records(text)
    try:
        _, header = next(records)
    except StopIteration:
        raise EmptyInput("empty LCT input") from None
    if len(header) < 2:
        raise MissingHeader(f"header line has {len(header)} field(s), need at least 2")
    cols = tuple(header[1:])
    width = len(header)
    row_entities: list[str] = []
    values: list[tuple[Cell, ...]] = []
    for line_no, rec in records:
        if len(rec) != width:
            raise RaggedRow(line_no, width, len(rec))
        row_entities.append(rec[0])
        values.append(tuple(Cell(v) for v in rec[1:]))
    if not row_entities:
        raise EmptyInput("LCT header has no data rows")
    return LctTable(cols, tuple(row_entities), tuple(values))


def _quote(value: str) -> str:
    if value and not any(c in value for c in ',"\r\n'):
        return value
    if value == "":
        return value
    return '"' + value.replace('"', '""') + '"'


def serialize_lct(table: LctTable) -> str:
    """Render a table as LCT text with ``none`` in the top-left corner."""
    lines = [",".join(["none", *(_quote(c) for c in table.col_entities)])]
    for entity, row in zip(table.row_entities, table.values):
        lines.append(",".join([_quote(entity), *(_quote(c.raw) for c in row)]))
    return "\n".join(lines) + "\n"
