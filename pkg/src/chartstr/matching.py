"""Maximum-cardinality bipartite matching (Hopcroft-Karp)."""

from __future__ import annotations

from collections import deque
from typing import Sequence

_INF = float("inf")


def max_bipartite_matching(adj: Sequence[Sequence[int]], n_right: int) -> list[int]:
    """Match left vertices to right vertices.

    Args:
        adj: ``adj[u]`` lists the right vertices compatible with left vertex ``u``.
        n_right: number of right vertices.

    Returns:
        ``match[u]`` is the right vertex paired with ``u``, or -1.
    """
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    dist = [0.0] * n_left

    def bfs() -> bool:
        q = deque()
        for u in range(n_left):
            if match_l[u] < 0:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = _INF
        found = False
        while q:
            u = q.popleft()
            for v in adj[u]:
                w = match_r[v]
                if w < 0:
                    found = True
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    q.append(w)
        return found

    def dfs(u: int) -> bool:
        # iterative to stay clear of the recursion limit on long augmenting paths
        stack = [(u, iter(adj[u]))]
        path: list[tuple[int, int]] = []
        while stack:
            x, it = stack[-1]
            advanced = False
            for v in it:
                w = match_r[v]
                if w < 0:
                    path.append((x, v))
                    for pu, pv in path:
                        match_l[pu] = pv
                        match_r[pv] = pu
                    return True
                if dist[w] == dist[x] + 1:
                    path.append((x, v))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                dist[x] = _INF
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in range(n_left):
            if match_l[u] < 0:
                dfs(u)
    return match_l


def matching_size(adj: Sequence[Sequence[int]], n_right: int) -> int:
    return sum(1 for v in max_bipartite_matching(adj, n_right) if v >= 0)
