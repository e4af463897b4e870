from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from chartstr.lct import Cell, LctTable  # noqa: E402
from chartstr.triplets import Triplet, TripletSet  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

# -- hypothesis strategies ----------------------------------------------------

_any_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)),
    max_size=12,
)
_nasty = st.sampled_from(['a,b', '"q"', "x\ny", "r\rs", " pad ", "", "none", "/n", "(p)", "é中"])
cell_text = st.one_of(_any_text, _nasty, st.decimals(allow_nan=False, allow_infinity=False, places=2).map(str))
entity_text = st.one_of(_any_text, _nasty).filter(lambda s: s.strip() != "")


@st.composite
def tables(draw, min_side: int = 1, max_side: int = 5, entity=entity_text, cell=cell_text) -> LctTable:
    m = draw(st.integers(min_side, max_side))
    n = draw(st.integers(min_side, max_side))
    cols = draw(st.lists(entity, min_size=m, max_size=m))
    rows = draw(st.lists(entity, min_size=n, max_size=n))
    values = [[Cell(draw(cell)) for _ in range(m)] for _ in range(n)]
    return LctTable(tuple(cols), tuple(rows), tuple(tuple(r) for r in values))


@st.composite
def unique_tables(draw, max_side: int = 5) -> LctTable:
    m = draw(st.integers(1, max_side))
    n = draw(st.integers(1, max_side))
    cols = draw(st.lists(entity_text, min_size=m, max_size=m, unique=True))
    rows = draw(st.lists(entity_text, min_size=n, max_size=n, unique=True))
    values = [[Cell(draw(cell_text)) for _ in range(m)] for _ in range(n)]
    return LctTable(tuple(cols), tuple(rows), tuple(tuple(r) for r in values))


# -- seeded random generators (acceptance suites) ------------------------------

VOCAB = ["Sales", "Sale", "sales", "Cost", "Costs", "Q1", "Q2", "Q3", "2019", "2020", "North", "Nort", "ab", "abc"]


def random_value(rng: random.Random) -> str:
    r = rng.random()
    if r < 0.75:
        return str(rng.choice([0, 1, 10, 12, 100, 250, 1000]) + rng.choice([0, 0, 0.4, 0.5, 1, 3]))
    if r < 0.9:
        return rng.choice(["n/a", "high", "low", "hi"])
    return rng.choice(["10%", "$1,000", "1,000.5"])


def perturb_value(rng: random.Random, raw: str) -> str:
    from chartstr.lct import normalize_numeric

    v = normalize_numeric(raw)
    r = rng.random()
    if v is None or r < 0.4:
        return raw
    factor = rng.choice(["1.03", "1.05", "1.08", "1.1", "1.2", "0.97", "0.9"])
    from decimal import Decimal

    return str(v * Decimal(factor))


def random_set_pair(rng: random.Random, max_size: int = 5) -> tuple[TripletSet, TripletSet]:
    """Small pred/gt pairs with many near-duplicates so matchings get contested."""
    q = rng.randint(0, max_size)
    gt = [Triplet(rng.choice(VOCAB), rng.choice(VOCAB), Cell(random_value(rng))) for _ in range(q)]
    pred = []
    for t in gt:
        if rng.random() < 0.15:
            continue
        r, c = t.row_entity, t.col_entity
        if rng.random() < 0.3:
            r = rng.choice(VOCAB)
        if rng.random() < 0.2:
            r, c = c, r
        pred.append(Triplet(r, c, Cell(perturb_value(rng, t.value.raw))))
    while len(pred) < max_size and rng.random() < 0.3:
        pred.append(Triplet(rng.choice(VOCAB), rng.choice(VOCAB), Cell(random_value(rng))))
    rng.shuffle(pred)
    return TripletSet(pred[:max_size]), TripletSet(gt)


def random_table(rng: random.Random, max_side: int = 5, unique: bool = False) -> LctTable:
    n, m = rng.randint(1, max_side), rng.randint(1, max_side)
    pool = list(VOCAB) + ["a,b", '"quoted"', "two  words", "Ünïcode", "x\ny"]
    if unique:
        rows = rng.sample(pool, n)
        cols = rng.sample(pool, m)
    else:
        rows = [rng.choice(pool) for _ in range(n)]
        cols = [rng.choice(pool) for _ in range(m)]
    values = tuple(tuple(Cell(random_value(rng)) for _ in range(m)) for _ in range(n))
    return LctTable(tuple(cols), tuple(rows), values)


def as_pairs(records) -> list:
    """Record set -> oracle form [(entities, raw)]."""
    return [(tuple(r.entities), r.value.raw) for r in records]


# -- acceptance reporting --------------------------------------------------------

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(name: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE[name] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split(".")[0])):
        passed, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
