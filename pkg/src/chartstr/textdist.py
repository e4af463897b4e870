"""Levenshtein edit distance over Unicode code points."""

from __future__ import annotations

from typing import Optional


def levenshtein(a: str, b: str, max_dist: Optional[int] = None) -> int:
    """Unit-cost insert/delete/substitute distance between ``a`` and ``b``.

    With ``max_dist`` set, the search is cut off once the distance is known
    to exceed it and ``max_dist + 1`` is returned instead of the exact value.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    la, lb = len(a), len(b)
    if max_dist is not None and la - lb > max_dist:
        return max_dist + 1
    if lb == 0:
        return la

    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        ca = a[i - 1]
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if ca == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        if max_dist is not None and min(cur) > max_dist:
            return max_dist + 1
        prev = cur
    d = prev[lb]
    if max_dist is not None and d > max_dist:
        return max_dist + 1
    return d
