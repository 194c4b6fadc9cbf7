"""Small helpers over parents-array DAG encodings.

A directed graph on n nodes is a sequence ``parents`` of n bitmasks;
bit u of ``parents[v]`` set means there is an edge u -> v.
"""
from __future__ import annotations

from typing import Sequence

from .masks import iter_bits


def topological_order(parents: Sequence[int]) -> list[int] | None:
    """Topological order of the graph, or None if it contains a cycle."""
    n = len(parents)
    placed = 0
    order: list[int] = []
    remaining = set(range(n))
    while remaining:
        ready = [v for v in remaining if parents[v] & ~placed == 0]
        if not ready:
            return None
        for v in sorted(ready):
            order.append(v)
            placed |= 1 << v
            remaining.discard(v)
    return order


def is_acyclic(parents: Sequence[int]) -> bool:
    return topological_order(parents) is not None


def ancestors(parents: Sequence[int], v: int) -> int:
    """Bitmask of all ancestors of node ``v`` (excluding ``v`` itself)."""
    seen = 0
    frontier = parents[v]
    while frontier:
        seen |= frontier
        nxt = 0
        for u in iter_bits(frontier):
            nxt |= parents[u] & ~seen
        frontier = nxt
    return seen


def skeleton(parents: Sequence[int]) -> frozenset[tuple[int, int]]:
    """Undirected edge set as (min, max) pairs."""
    edges = set()
    for v, mask in enumerate(parents):
        for u in iter_bits(mask):
            edges.add((u, v) if u < v else (v, u))
    return frozenset(edges)


def v_structures(parents: Sequence[int]) -> frozenset[tuple[int, int, int]]:
    """Colliders u -> w <- v with u, v non-adjacent, as (u, w, v), u < v."""
    adj = skeleton(parents)
    out = set()
    for w, mask in enumerate(parents):
        pa = list(iter_bits(mask))
        for a in range(len(pa)):
            for b in range(a + 1, len(pa)):
                u, v = pa[a], pa[b]
                if (u, v) not in adj:
                    out.add((u, w, v))
    return frozenset(out)
