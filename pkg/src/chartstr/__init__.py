"""Chart table schema, SCRM perception metric, QA scoring and chart simulation."""

from .lct import Cell, LctTable, normalize_numeric, parse_lct, serialize_lct
from .qa import QaRecord, relaxed_accuracy, relaxed_match
from .scrm import (
    HIGH,
    SLIGHT,
    STRICT,
    ToleranceLevel,
    dataset_report,
    image_iou,
    judge_pair,
)
from .triplets import (
    NTuple,
    NTupleSet,
    Triplet,
    TripletSet,
    canonical_key,
    from_str,
    parse_str,
    permute,
    serialize_str,
    to_str,
    transpose,
)

__version__ = "0.1.0"
