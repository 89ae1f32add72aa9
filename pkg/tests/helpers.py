"""Shared tiny-instance builders and independent oracles used across test modules."""
from __future__ import annotations

from collections import deque
from itertools import combinations

from obroute.graph import CapacitatedGraph


def path_graph(n: int, cap: int = 1) -> CapacitatedGraph:
    return CapacitatedGraph(n, [(i, i + 1, cap) for i in range(n - 1)])


def cycle_graph(n: int, cap: int = 1) -> CapacitatedGraph:
    edges = [(i, (i + 1) % n, cap) for i in range(n)]
    return CapacitatedGraph(n, edges)


def single_edge(cap: int = 1) -> CapacitatedGraph:
    return CapacitatedGraph(2, [(0, 1, cap)])


def triangle(cap: int = 1) -> CapacitatedGraph:
    return CapacitatedGraph(3, [(0, 1, cap), (1, 2, cap), (0, 2, cap)])


def diamond() -> CapacitatedGraph:
    # two vertex-disjoint 2-hop routes 0-1-3 and 0-2-3
    return CapacitatedGraph(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)])


# ---------------------------------------------------------------------------
# oracles (independent of the implementations under test)
# ---------------------------------------------------------------------------

def bfs_reachable(n: int, arcs: list[tuple[int, int]], start: int) -> set[int]:
    adj: dict[int, list[int]] = {}
    for u, v in arcs:
        adj.setdefault(u, []).append(v)
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for u in adj.get(v, []):
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


def brute_force_min_cut(n: int, arcs: list[tuple[int, int, int]], s: int, t: int) -> int:
    """Minimum s-t cut by subset enumeration. Directed arc list, n <= ~12."""
    others = [v for v in range(n) if v not in (s, t)]
    best = None
    for k in range(len(others) + 1):
        for side in combinations(others, k):
            side_s = set(side) | {s}
            cut = sum(cap for u, v, cap in arcs if u in side_s and v not in side_s)
            if best is None or cut < best:
                best = cut
    return best


def all_simple_paths(g: CapacitatedGraph, s: int, t: int, limit: int = 10_000) -> list[list[int]]:
    out: list[list[int]] = []

    def walk(v: int, path: list[int], seen: set[int]):
        if v == t:
            out.append(path[:])
            return
        if len(out) >= limit:
            return
        for u in g.neighbors(v):
            if u not in seen:
                seen.add(u)
                path.append(u)
                walk(u, path, seen)
                path.pop()
                seen.remove(u)

    walk(s, [s], {s})
    return out


def path_edge_loads(g: CapacitatedGraph, weighted_paths: list[tuple[list[int], float]]) -> dict[int, float]:
    loads: dict[int, float] = {}
    for path, w in weighted_paths:
        for a, b in zip(path, path[1:]):
            idx = g.edge_index(a, b)
            loads[idx] = loads.get(idx, 0.0) + w
    return loads
