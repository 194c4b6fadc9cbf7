"""k-best network structures by dynamic programming over variable subsets.

Every DAG has a sink, so the k best networks over a subset W are found among,
for each s in W, the k best networks over W with s as a sink; those in turn
combine the k best parent sets for s within W minus {s} with the k best
networks over W minus {s}. For a fixed sink the candidate (i, j) rank pairs
form a lattice whose value is the sum of two sorted sequences, explored
best-first from (1, 1) until the value falls below the current k-th best.

Queues keep construction records (sink, parent rank, sub-network rank); full
parents arrays are materialized on demand for duplicate detection and for the
final output, never stored per subset.
"""
from __future__ import annotations

import heapq
from bisect import insort
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MemoryBudgetError
from .graphs import is_acyclic
from .kbest_parents import ParentTable
from .masks import iter_bits, masks_by_size


@dataclass(frozen=True)
class ScoredNetwork:
    """One ranked DAG: per-node parent masks plus its total log score."""

    parents: tuple[int, ...]
    score: float
    rank: int


@dataclass(frozen=True)
class LatticeNode:
    """A rank pair in the sink search space; 1-based per queue position."""

    i: int
    j: int
    value: float


@dataclass
class NetQueue:
    """Top networks over one subset, as scores plus construction records."""

    subset: int
    scores: np.ndarray
    sinks: np.ndarray  # uint8; sink node of each entry
    parent_ranks: np.ndarray  # uint32; 0-based rank into the sink's parent queue
    sub_ranks: np.ndarray  # uint32; 0-based rank into the sub-network queue

    def __len__(self) -> int:
        return int(self.scores.shape[0])


@dataclass
class SearchStats:
    """Work counters for the subset DP (asserted against closed forms)."""

    sink_searches: int = 0
    lattice_pops: int = 0
    max_pops_per_search: int = 0
    inserted: int = 0
    duplicates: int = 0


_BASE_QUEUE = NetQueue(
    subset=0,
    scores=np.zeros(1),
    sinks=np.zeros(1, dtype=np.uint8),
    parent_ranks=np.zeros(1, dtype=np.uint32),
    sub_ranks=np.zeros(1, dtype=np.uint32),
)


def lattice_value(
    s: int, i: int, j: int, parent_table: ParentTable, net_queue: NetQueue
) -> float:
    """Sum of the i-th best parent score for ``s`` and the j-th best sub-network.

    ``net_queue`` is the queue over W minus {s}; ranks are 1-based.
    """
    ps, _ = parent_table.arrays(s, net_queue.subset)
    if not 1 <= i <= ps.shape[0]:
        raise IndexError(f"parent rank {i} out of range 1..{ps.shape[0]}")
    if not 1 <= j <= len(net_queue):
        raise IndexError(f"sub-network rank {j} out of range 1..{len(net_queue)}")
    return float(ps[i - 1] + net_queue.scores[j - 1])


def best_with_sink(
    s: int,
    W: int,
    k: int,
    parent_table: ParentTable,
    net_tables: Sequence[NetQueue | None],
) -> list[LatticeNode]:
    """At most k lattice nodes for sink ``s`` over ``W``, best value first.

    Standalone form of the per-sink search: explores from (1, 1) with children
    (i+1, j) and (i, j+1), tracking visited nodes, and stops after k nodes or
    when the lattice is exhausted.
    """
    if not W & (1 << s):
        raise ValueError("sink must belong to the subset")
    sub = W & ~(1 << s)
    nq = net_tables[sub]
    if nq is None:
        raise ValueError("net queue for the sink-free subset is not available")
    ps, _ = parent_table.arrays(s, sub)
    np_len, nn_len = ps.shape[0], len(nq)
    out: list[LatticeNode] = []
    heap = [(-(float(ps[0]) + float(nq.scores[0])), 1, 1)]
    visited = {(1, 1)}
    while heap and len(out) < k:
        negv, i, j = heapq.heappop(heap)
        out.append(LatticeNode(i=i, j=j, value=-negv))
        if i + 1 <= np_len and (i + 1, j) not in visited:
            visited.add((i + 1, j))
            heapq.heappush(heap, (-(float(ps[i]) + float(nq.scores[j - 1])), i + 1, j))
        if j + 1 <= nn_len and (i, j + 1) not in visited:
            visited.add((i, j + 1))
            heapq.heappush(heap, (-(float(ps[i - 1]) + float(nq.scores[j])), i, j + 1))
    return out


def estimate_net_tables_bytes(n: int, k: int) -> int:
    return (1 << n) * k * (8 + 1 + 4 + 4)


def _materialize(
    subset: int,
    rank: int,
    net_tables: Sequence[NetQueue | None],
    parent_table: ParentTable,
    memo: dict[tuple[int, int], tuple[int, ...]],
    n: int,
) -> tuple[int, ...]:
    """Parents array for entry ``rank`` of ``subset``'s queue (nodes outside 0)."""
    key = (subset, rank)
    got = memo.get(key)
    if got is not None:
        return got
    if subset == 0:
        enc = (0,) * n
    else:
        nq = net_tables[subset]
        s = int(nq.sinks[rank])
        sub = subset & ~(1 << s)
        below = _materialize(sub, int(nq.sub_ranks[rank]), net_tables, parent_table, memo, n)
        _, masks = parent_table.arrays(s, sub)
        enc = below[:s] + (int(masks[int(nq.parent_ranks[rank])]),) + below[s + 1 :]
    memo[key] = enc
    return enc


def kbest_networks(
    parent_table: ParentTable,
    k: int,
    memory_budget: int | None = None,
    return_stats: bool = False,
):
    """The min(k, #DAGs) best networks over all variables, score descending.

    Subsets are processed in increasing cardinality; within a subset, sinks in
    ascending index share one queue whose k-th score is the (monotonically
    tightening) search threshold. Duplicate graphs reached through different
    sinks are kept once. Ties order by the parents array, ascending.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if parent_table.k < k:
        raise ValueError(
            f"parent table holds {parent_table.k} candidates per set; need at least {k}"
        )
    n = parent_table.n
    required = estimate_net_tables_bytes(n, k)
    if memory_budget is not None and required > memory_budget:
        raise MemoryBudgetError("network queues", required, memory_budget)

    net_tables: list[NetQueue | None] = [None] * (1 << n)
    net_tables[0] = _BASE_QUEUE
    stats = SearchStats()

    for W in masks_by_size(n):
        if W == 0:
            continue
        entries: list[tuple[float, tuple[int, ...], int, int, int]] = []
        seen: set[tuple[int, ...]] = set()
        memo: dict[tuple[int, int], tuple[int, ...]] = {}
        kth_neg = None  # entries[k-1][0] when full
        for s in iter_bits(W):
            sub = W & ~(1 << s)
            ps_arr, pm_arr = parent_table.arrays(s, sub)
            ps = ps_arr.tolist()
            pm = pm_arr.tolist()
            nq = net_tables[sub]
            ns = nq.scores.tolist()
            np_len = len(ps)
            nn_len = len(ns)
            stats.sink_searches += 1
            pops = 0
            heap = [(-(ps[0] + ns[0]), 0, 0)]
            visited = {(0, 0)}
            while heap:
                negv, i, j = heapq.heappop(heap)
                if kth_neg is not None and negv > kth_neg:
                    break
                pops += 1
                below = _materialize(sub, j, net_tables, parent_table, memo, n)
                enc = below[:s] + (pm[i],) + below[s + 1 :]
                if enc not in seen:
                    seen.add(enc)
                    insort(entries, (negv, enc, s, i, j))
                    stats.inserted += 1
                    if len(entries) > k:
                        entries.pop()
                    if len(entries) == k:
                        kth_neg = entries[-1][0]
                else:
                    stats.duplicates += 1
                if i + 1 < np_len and (i + 1, j) not in visited:
                    visited.add((i + 1, j))
                    heapq.heappush(heap, (-(ps[i + 1] + ns[j]), i + 1, j))
                if j + 1 < nn_len and (i, j + 1) not in visited:
                    visited.add((i, j + 1))
                    heapq.heappush(heap, (-(ps[i] + ns[j + 1]), i, j + 1))
            stats.lattice_pops += pops
            stats.max_pops_per_search = max(stats.max_pops_per_search, pops)
        net_tables[W] = NetQueue(
            subset=W,
            scores=np.array([-e[0] for e in entries]),
            sinks=np.array([e[2] for e in entries], dtype=np.uint8),
            parent_ranks=np.array([e[3] for e in entries], dtype=np.uint32),
            sub_ranks=np.array([e[4] for e in entries], dtype=np.uint32),
        )

    full = (1 << n) - 1
    top = net_tables[full]
    memo: dict[tuple[int, int], tuple[int, ...]] = {}
    result = []
    for r in range(len(top)):
        enc = _materialize(full, r, net_tables, parent_table, memo, n)
        if not is_acyclic(enc):
            raise RuntimeError("internal error: reconstructed network has a cycle")
        result.append(ScoredNetwork(parents=enc, score=float(top.scores[r]), rank=r + 1))
    if return_stats:
        return result, stats
    return result


def to_dot(network: ScoredNetwork, names: Sequence[str]) -> str:
    """Graphviz source for one network."""
    lines = [f'digraph rank{network.rank} {{']
    lines.append(f'  label="rank {network.rank}, log score {network.score:.6f}";')
    for name in names:
        lines.append(f'  "{name}";')
    for v, mask in enumerate(network.parents):
        for u in iter_bits(mask):
            lines.append(f'  "{names[u]}" -> "{names[v]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def networks_to_json(networks: Sequence[ScoredNetwork], names: Sequence[str]) -> list[dict]:
    """JSON-ready list: rank, log score, and parent names per node."""
    return [
        {
            "rank": net.rank,
            "log_score": net.score,
            "parents": [[names[u] for u in iter_bits(mask)] for mask in net.parents],
        }
        for net in networks
    ]
