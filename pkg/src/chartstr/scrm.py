"""SCRM: a set-overlap metric for predicted vs. ground-truth chart triplets.

Each predicted record is judged against each ground-truth record under a
tolerance level (an entity edit-distance budget plus a relative value error
budget).  Per image the compatible pairs are turned into an IoU, and over a
dataset the IoUs are thresholded into Precision@t, mPrecision (mean over
t = 0.50, 0.55, ..., 0.95) and EM (Precision@1 under the strict level).

IoUs and precisions are kept as :class:`fractions.Fraction` so threshold
comparisons are exact; reports convert to float on output.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .lct import Cell
from .matching import matching_size
from .textdist import levenshtein
from .triplets import NTuple, Triplet, _RecordSet, canonical_key, normalize_entity

__all__ = [
    "ToleranceLevel",
    "STRICT",
    "SLIGHT",
    "HIGH",
    "TOLERANCES",
    "MPRECISION_THRESHOLDS",
    "REPORT_THRESHOLDS",
    "PairJudgment",
    "ImageScore",
    "ScrmReport",
    "EmptyDataset",
    "get_tolerance",
    "judge_pair",
    "image_iou",
    "image_scores",
    "dataset_report",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = "1.0"
INFINITY = Decimal("Infinity")
STRICT_EPS = Decimal("1e-9")

MODES = ("matched", "paper_literal")
STRATEGIES = ("joined", "per_entity")


class EmptyDataset(ValueError):
    pass


@dataclass(frozen=True)
class ToleranceLevel:
    name: str
    j_thr: int
    e_thr: Decimal

    def __post_init__(self) -> None:
        object.__setattr__(self, "e_thr", Decimal(str(self.e_thr)))
        if int(self.j_thr) != self.j_thr or self.j_thr < 0:
            raise ValueError(f"j_thr must be a non-negative integer, got {self.j_thr!r}")
        if not self.e_thr.is_finite() or self.e_thr < 0:
            raise ValueError(f"e_thr must be a non-negative number, got {self.e_thr!r}")


STRICT = ToleranceLevel("strict", 0, Decimal("0"))
SLIGHT = ToleranceLevel("slight", 2, Decimal("0.05"))
HIGH = ToleranceLevel("high", 5, Decimal("0.1"))
TOLERANCES: dict[str, ToleranceLevel] = {t.name: t for t in (STRICT, SLIGHT, HIGH)}

# 0.05 * t for t = 10..19
MPRECISION_THRESHOLDS: tuple[Fraction, ...] = tuple(Fraction(t, 20) for t in range(10, 20))
REPORT_THRESHOLDS: tuple[Fraction, ...] = (
    Fraction(1, 2),
    Fraction(3, 4),
    Fraction(19, 20),
    Fraction(1),
)


def get_tolerance(name: str) -> ToleranceLevel:
    try:
        return TOLERANCES[name]
    except KeyError:
        raise ValueError(f"unknown tolerance {name!r}; choose from {sorted(TOLERANCES)}") from None


def _as_fraction(t: Union[float, str, Fraction, Decimal]) -> Fraction:
    if isinstance(t, Fraction):
        return t
    return Fraction(str(t))


@dataclass(frozen=True)
class PairJudgment:
    j: int
    e: Decimal
    l: bool


Record = Union[Triplet, NTuple]


def _entity_distance(pred: Record, gt: Record, strategy: str, cap: Optional[int]) -> int:
    if strategy == "joined":
        return levenshtein(canonical_key(pred), canonical_key(gt), cap)
    if strategy == "per_entity":
        pe = [normalize_entity(e) for e in pred.entities]
        ge = [normalize_entity(e) for e in gt.entities]
        if len(pe) != len(ge):
            return levenshtein(canonical_key(pred), canonical_key(gt), cap)
        return min(
            max(levenshtein(a, b, cap) for a, b in zip(pe, perm))
            for perm in itertools.permutations(ge)
        )
    raise ValueError(f"unknown matching strategy {strategy!r}")


@dataclass(frozen=True)
class _ValueStats:
    """What is needed to decide the value half of a judgment at any tolerance."""

    numeric: bool
    e: Decimal
    close: bool = False  # |p - g| <= 1e-9 * max(1, |g|)
    text_dist: int = 0


def _value_stats(pred: Cell, gt: Cell, cap: Optional[int]) -> _ValueStats:
    vp, vg = pred.numeric, gt.numeric
    if vp is not None and vg is not None:
        diff = abs(vp - vg)
        if vg == 0:
            e = Decimal(0) if vp == 0 else INFINITY
        else:
            e = diff / abs(vg)
        close = diff <= STRICT_EPS * max(Decimal(1), abs(vg))
        return _ValueStats(True, e, close)
    if vp is None and vg is None:
        d = levenshtein(normalize_entity(pred.raw), normalize_entity(gt.raw), cap)
        return _ValueStats(False, INFINITY, text_dist=d)
    return _ValueStats(True, INFINITY)


def _value_error(stats: _ValueStats, tol: ToleranceLevel) -> Decimal:
    if stats.numeric:
        return stats.e
    return Decimal(0) if stats.text_dist <= tol.j_thr else INFINITY


def _value_ok(stats: _ValueStats, tol: ToleranceLevel) -> bool:
    if stats.numeric:
        return stats.close or stats.e <= tol.e_thr
    return stats.text_dist <= tol.j_thr


def judge_pair(
    pred: Record, gt: Record, tol: ToleranceLevel, strategy: str = "joined"
) -> PairJudgment:
    """Judge one predicted record against one ground-truth record.

    ``j`` is the Levenshtein distance between the canonical entity keys.
    ``e`` is the relative value error; for two non-numeric values it is 0
    when the normalized strings are within ``tol.j_thr`` edits and infinite
    otherwise, and it is infinite when only one side is numeric.  Numeric
    values within 1e-9 (relative, floored at 1) of each other always pass.
    """
    j = _entity_distance(pred, gt, strategy, None)
    stats = _value_stats(pred.value, gt.value, None)
    e = _value_error(stats, tol)
    return PairJudgment(j, e, j <= tol.j_thr and _value_ok(stats, tol))


@dataclass(frozen=True)
class ImageScore:
    """IoU of one predicted set against its ground truth at one tolerance.

    In ``paper_literal`` mode ``matched`` is the raw count of compatible
    pairs, and ``iou`` may leave [0, 1]; ``out_of_range`` flags that, and
    ``iou`` is ``math.inf`` when the denominator vanishes.
    """

    iou: Union[Fraction, float]
    matched: int
    p: int
    q: int
    out_of_range: bool = False

    def to_dict(self) -> dict:
        iou = None if self.iou == math.inf else float(self.iou)
        d = {"iou": iou, "matched": self.matched, "P": self.p, "Q": self.q}
        if self.out_of_range:
            d["out_of_range"] = True
        return d


def _compat(
    pred: Sequence[Record],
    gt: Sequence[Record],
    tolerances: Sequence[ToleranceLevel],
    strategy: str,
) -> dict[str, list[list[int]]]:
    cap = max(t.j_thr for t in tolerances)
    adj: dict[str, list[list[int]]] = {t.name: [[] for _ in pred] for t in tolerances}
    # entity distances depend only on the keys; charts repeat keys rarely but
    # values repeat often, so both are memoized
    ent_cache: dict[tuple, int] = {}
    val_cache: dict[tuple[str, str], _ValueStats] = {}
    for pi, p in enumerate(pred):
        for qi, g in enumerate(gt):
            ek = (tuple(p.entities), tuple(g.entities))
            j = ent_cache.get(ek)
            if j is None:
                j = ent_cache[ek] = _entity_distance(p, g, strategy, cap)
            if j > cap:
                continue
            vk = (p.value.raw, g.value.raw)
            vs = val_cache.get(vk)
            if vs is None:
                vs = val_cache[vk] = _value_stats(p.value, g.value, cap)
            for t in tolerances:
                if j <= t.j_thr and _value_ok(vs, t):
                    adj[t.name][pi].append(qi)
    return adj


def _score(adj: list[list[int]], p: int, q: int, mode: str) -> ImageScore:
    if p == 0 and q == 0:
        return ImageScore(Fraction(1), 0, 0, 0)
    if mode == "matched":
        m = matching_size(adj, q)
        return ImageScore(Fraction(m, p + q - m), m, p, q)
    if mode == "paper_literal":
        s = sum(len(row) for row in adj)
        denom = p + q - s
        if denom == 0:
            return ImageScore(math.inf, s, p, q, True)
        iou = Fraction(s, denom)
        return ImageScore(iou, s, p, q, not (0 <= iou <= 1))
    raise ValueError(f"unknown IoU mode {mode!r}; choose from {MODES}")


def image_scores(
    pred: Iterable[Record],
    gt: Iterable[Record],
    tolerances: Sequence[ToleranceLevel] = (STRICT, SLIGHT, HIGH),
    mode: str = "matched",
    strategy: str = "joined",
) -> dict[str, ImageScore]:
    """Score one image at several tolerances, sharing the pairwise work."""
    if mode not in MODES:
        raise ValueError(f"unknown IoU mode {mode!r}; choose from {MODES}")
    pred, gt = list(pred), list(gt)
    adj = _compat(pred, gt, tolerances, strategy)
    return {t.name: _score(adj[t.name], len(pred), len(gt), mode) for t in tolerances}


def image_iou(
    pred: Iterable[Record],
    gt: Iterable[Record],
    tol: ToleranceLevel,
    mode: str = "matched",
    strategy: str = "joined",
) -> ImageScore:
    """IoU between a predicted and a ground-truth record set.

    ``matched`` mode counts a maximum one-to-one matching of compatible pairs,
    so the IoU stays in [0, 1].  ``paper_literal`` mode counts every
    compatible pair, which can overshoot when one record matches several.
    """
    score = image_scores(pred, gt, (tol,), mode, strategy)[tol.name]
    if score.out_of_range:
        warnings.warn(
            f"paper_literal IoU {score.iou} outside [0, 1] (P={score.p}, Q={score.q})",
            RuntimeWarning,
            stacklevel=2,
        )
    return score


def _fmt_thr(t: Fraction) -> str:
    return repr(float(t))


@dataclass
class ScrmReport:
    tolerances: list[ToleranceLevel]
    thresholds: list[Fraction]
    mode: str
    ids: list[str]
    per_image: list[dict[str, ImageScore]]
    precision_at: dict[str, dict[Fraction, Fraction]]
    m_precision: dict[str, Fraction]
    em: Fraction
    strategy: str = "joined"
    extra: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return len(self.per_image)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "strategy": self.strategy,
            "L": self.L,
            "tolerances": {
                t.name: {"J_thr": t.j_thr, "e_thr": float(t.e_thr)} for t in self.tolerances
            },
            "thresholds": [float(t) for t in self.thresholds],
            "precision_at": {
                name: {_fmt_thr(t): float(v) for t, v in by_t.items()}
                for name, by_t in self.precision_at.items()
            },
            "m_precision": {name: float(v) for name, v in self.m_precision.items()},
            "em": float(self.em),
            "per_image": [
                {"id": i, **{name: s.to_dict() for name, s in scores.items()}}
                for i, scores in zip(self.ids, self.per_image)
            ],
            **self.extra,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)

    def render_table(self) -> str:
        """Plain-text table: one row per tolerance, mPrecision then Precision@t."""
        thr_labels = [("1 (EM)" if t == 1 else _fmt_thr(t)) for t in self.thresholds]
        header = ["Tolerance", "mPrecision", *thr_labels]
        rows = []
        for t in self.tolerances:
            cells = [t.name, f"{float(self.m_precision[t.name]):.4f}"]
            for thr in self.thresholds:
                if thr == 1 and t.name != STRICT.name:
                    cells.append("-")
                else:
                    cells.append(f"{float(self.precision_at[t.name][thr]):.4f}")
            rows.append(cells)
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
        lines = [
            "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
            for r in [header, *rows]
        ]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def _score_pair(args) -> dict[str, ImageScore]:
    pred, gt, tols, mode, strategy = args
    return image_scores(pred, gt, tols, mode, strategy)


def _precision(ious: Sequence, t: Fraction) -> Fraction:
    return Fraction(sum(1 for x in ious if x >= t), len(ious))


def dataset_report(
    pairs: Sequence[tuple[_RecordSet, _RecordSet]],
    tolerances: Optional[Sequence[ToleranceLevel]] = None,
    thresholds: Optional[Sequence] = None,
    mode: str = "matched",
    strategy: str = "joined",
    ids: Optional[Sequence[str]] = None,
    workers: int = 1,
) -> ScrmReport:
    """Aggregate per-image IoUs into Precision@t, mPrecision and EM.

    Args:
        pairs: ``(pred, gt)`` record sets, one per image.
        tolerances: levels to report; defaults to strict, slight and high.
            EM is always computed under strict.
        thresholds: fixed IoU thresholds for Precision@t; defaults to
            0.5, 0.75, 0.95 and 1.0.
        workers: process count for per-image scoring.

    Raises:
        EmptyDataset: ``pairs`` is empty.
    """
    if not pairs:
        raise EmptyDataset("no images to score")
    tols = list(tolerances) if tolerances else [STRICT, SLIGHT, HIGH]
    names = [t.name for t in tols]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate tolerance names in {names}")
    work = list(tols)
    if STRICT.name not in names:
        work.append(STRICT)
    elif TOLERANCES.get(STRICT.name) != next(t for t in tols if t.name == STRICT.name):
        raise ValueError("a custom level may not reuse the name 'strict'")
    thr = [_as_fraction(t) for t in (thresholds if thresholds is not None else REPORT_THRESHOLDS)]
    ids = [str(i) for i in (ids if ids is not None else range(len(pairs)))]
    if len(ids) != len(pairs):
        raise ValueError("ids and pairs differ in length")

    jobs = [(list(p), list(g), work, mode, strategy) for p, g in pairs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            scored = list(ex.map(_score_pair, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        scored = [_score_pair(j) for j in jobs]

    precision_at: dict[str, dict[Fraction, Fraction]] = {}
    m_precision: dict[str, Fraction] = {}
    for t in work:
        ious = [s[t.name].iou for s in scored]
        precision_at[t.name] = {x: _precision(ious, x) for x in thr}
        m_precision[t.name] = sum(
            (_precision(ious, x) for x in MPRECISION_THRESHOLDS), Fraction(0)
        ) / len(MPRECISION_THRESHOLDS)
    em = _precision([s[STRICT.name].iou for s in scored], Fraction(1))

    per_image = [{t.name: s[t.name] for t in tols} for s in scored]
    return ScrmReport(
        tolerances=tols,
        thresholds=thr,
        mode=mode,
        ids=ids,
        per_image=per_image,
        precision_at={n: precision_at[n] for n in names},
        m_precision={n: m_precision[n] for n in names},
        em=em,
        strategy=strategy,
    )


def tolerance_from_mapping(name: str, mapping: Mapping) -> ToleranceLevel:
    """Build a custom level from ``{"J_thr": int, "e_thr": number}``."""
    return ToleranceLevel(name, int(mapping["J_thr"]), Decimal(str(mapping["e_thr"])))
