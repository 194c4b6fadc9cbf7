"""Per-variable k-best parent sets within every candidate set.

For a variable v and candidate set C, the k best parent sets drawn from C are
the top k of: the best sets from each C minus one element, plus C itself.
Candidate sets are therefore processed in layers of increasing cardinality,
merging the child queues pairwise and then offering C's own score.

Queue order is canonical: score descending, then parent mask ascending as an
unsigned integer, so equal-scoring sets resolve deterministically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MemoryBudgetError
from .masks import drop_bit, insert_bit, iter_bits, masks_by_size
from .scoring import LocalScoreTable


@dataclass(frozen=True)
class ParentQueue:
    """Top-k parent sets for one (variable, candidate set) pair."""

    scores: np.ndarray  # float64, non-increasing
    masks: np.ndarray  # uint32 full-width parent masks; ascending within ties
    capacity: int

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    @property
    def entries(self) -> list[tuple[float, int]]:
        return [(float(s), int(m)) for s, m in zip(self.scores, self.masks)]


def _merge_arrays(sa, ma, sb, mb, k: int):
    """Top-k of two canonical-sorted (score, mask) arrays, duplicates collapsed.

    Equal masks always carry equal scores (the score is a function of the
    mask), so duplicates sort adjacently and a single neighbor test removes
    them.
    """
    if sa.shape[0] == 0:
        return sb[:k].copy(), mb[:k].copy()
    if sb.shape[0] == 0:
        return sa[:k].copy(), ma[:k].copy()
    scores = np.concatenate([sa, sb])
    masks = np.concatenate([ma, mb])
    order = np.lexsort((masks, -scores))
    masks = masks[order]
    scores = scores[order]
    keep = np.empty(masks.shape[0], dtype=bool)
    keep[0] = True
    np.not_equal(masks[1:], masks[:-1], out=keep[1:])
    return scores[keep][:k], masks[keep][:k]


def merge_queues(a: ParentQueue, b: ParentQueue, k: int) -> ParentQueue:
    """Top-k of the union of two queues with duplicate parent sets collapsed."""
    s, m = _merge_arrays(a.scores, a.masks, b.scores, b.masks, k)
    return ParentQueue(scores=s, masks=m, capacity=k)


@dataclass
class VariableParentTable:
    """k-best parent queues for one variable over every candidate set.

    Rows are indexed by the candidate mask with the variable's bit removed;
    row c holds min(k, 2^|C|) valid entries, padded with -inf.
    """

    v: int
    n: int
    k: int
    scores: np.ndarray = field(repr=False)  # (2^(n-1), k) float64
    masks: np.ndarray = field(repr=False)  # (2^(n-1), k) uint32
    lengths: np.ndarray = field(repr=False)  # (2^(n-1),) int32
    merge_count: int = 0

    def _index(self, candidate_mask: int) -> int:
        if candidate_mask & (1 << self.v):
            raise ValueError("candidate set may not contain the variable itself")
        if candidate_mask >> self.n:
            raise ValueError("candidate mask out of range")
        return drop_bit(candidate_mask, self.v)

    def arrays(self, candidate_mask: int) -> tuple[np.ndarray, np.ndarray]:
        c = self._index(candidate_mask)
        ln = self.lengths[c]
        return self.scores[c, :ln], self.masks[c, :ln]

    def queue(self, candidate_mask: int) -> ParentQueue:
        s, m = self.arrays(candidate_mask)
        return ParentQueue(scores=s, masks=m, capacity=self.k)


def estimate_parent_table_bytes(n: int, k: int, variables: int = 1) -> int:
    per_cell = 8 + 4
    return variables * (1 << (n - 1)) * (k * per_cell + 4)


def best_parents(
    table: LocalScoreTable,
    v: int,
    k: int,
    memory_budget: int | None = None,
) -> VariableParentTable:
    """Exact k-best parent sets for ``v`` within every candidate set.

    Layers are processed in increasing candidate-set size; each set's queue is
    the pairwise merge of its immediate-subset queues, after which the set
    itself is inserted if it beats the current minimum (or the queue is not
    yet full). Ties resolve by ascending mask.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = table.n
    if not 0 <= v < n:
        raise ValueError(f"variable index {v} out of range")
    required = estimate_parent_table_bytes(n, k)
    if memory_budget is not None and required > memory_budget:
        raise MemoryBudgetError(f"parent-set table for variable {v}", required, memory_budget)
    cells = 1 << (n - 1)
    row = table.row(v)
    out_scores = np.full((cells, k), -np.inf)
    out_masks = np.zeros((cells, k), dtype=np.uint32)
    lengths = np.zeros(cells, dtype=np.int32)
    merge_count = 0

    out_scores[0, 0] = row[0]
    out_masks[0, 0] = 0
    lengths[0] = 1

    for c in masks_by_size(n - 1):
        if c == 0:
            continue
        cand_mask = insert_bit(c, v)
        acc_s = np.empty(0)
        acc_m = np.empty(0, dtype=np.uint32)
        for bit in iter_bits(cand_mask):
            sub = drop_bit(cand_mask & ~(1 << bit), v)
            ln = lengths[sub]
            acc_s, acc_m = _merge_arrays(
                acc_s, acc_m, out_scores[sub, :ln], out_masks[sub, :ln], k
            )
            merge_count += 1
        own = row[c]
        if own != -np.inf:
            # Canonical slot for the candidate set itself: after every entry
            # with a greater-or-equal score (subsets compare below it as ints).
            pos = int(np.searchsorted(-acc_s, -own, side="right"))
            if pos < k:
                acc_s = np.insert(acc_s, pos, own)[:k]
                acc_m = np.insert(acc_m, pos, np.uint32(cand_mask))[:k]
        ln = acc_s.shape[0]
        out_scores[c, :ln] = acc_s
        out_masks[c, :ln] = acc_m
        lengths[c] = ln

    return VariableParentTable(
        v=v, n=n, k=k, scores=out_scores, masks=out_masks, lengths=lengths,
        merge_count=merge_count,
    )


@dataclass
class ParentTable:
    """k-best parent queues for every variable."""

    n: int
    k: int
    variables: list[VariableParentTable]

    def queue(self, v: int, candidate_mask: int) -> ParentQueue:
        return self.variables[v].queue(candidate_mask)

    def arrays(self, v: int, candidate_mask: int) -> tuple[np.ndarray, np.ndarray]:
        return self.variables[v].arrays(candidate_mask)

    @property
    def merge_count(self) -> int:
        return sum(t.merge_count for t in self.variables)


def build_parent_table(
    table: LocalScoreTable,
    k: int,
    memory_budget: int | None = None,
) -> ParentTable:
    """k-best parent queues for all variables (layered DP per variable)."""
    required = estimate_parent_table_bytes(table.n, k, variables=table.n)
    if memory_budget is not None and required > memory_budget:
        raise MemoryBudgetError("parent-set tables", required, memory_budget)
    variables = [best_parents(table, v, k) for v in range(table.n)]
    return ParentTable(n=table.n, k=k, variables=variables)


def dump_variable_queues(vpt: VariableParentTable, names=None) -> dict:
    """JSON-ready diagnostic dump of one variable's queues."""
    def label(mask: int) -> list:
        bits = list(iter_bits(mask))
        return [names[b] for b in bits] if names else bits

    queues = {}
    for c in range(1 << (vpt.n - 1)):
        cand = insert_bit(c, vpt.v)
        ln = int(vpt.lengths[c])
        queues[str(cand)] = {
            "candidate_set": label(cand),
            "entries": [
                {"score": float(vpt.scores[c, i]), "parents": label(int(vpt.masks[c, i]))}
                for i in range(ln)
            ],
        }
    return {"variable": vpt.v if names is None else names[vpt.v], "k": vpt.k, "queues": queues}
