"""Exhaustive ground truth over all labeled DAGs, for small variable counts.

Enumeration recurses on the exact sink set: a DAG on S is uniquely a nonempty
antichain T of sinks, a DAG on S minus T, and a choice of parents within
S minus T for each sink such that every sink of the inner DAG gains an
outgoing edge into T. Each labeled DAG is therefore produced exactly once,
streamed without any duplicate-detection state.
"""
from __future__ import annotations

import heapq
from functools import lru_cache
from math import comb
from typing import Iterable, Iterator

import numpy as np

from .dataset import Dataset
from .errors import OracleSizeError
from .kbest_dags import ScoredNetwork
from .masks import iter_bits, iter_submasks
from .posterior import Feature
from .scoring import LocalScoreTable, all_local_scores

MAX_ORACLE_VARS = 6


@lru_cache(maxsize=None)
def dag_count(n: int) -> int:
    """Number of labeled DAGs on n nodes (alternating-sum recurrence)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1
    return sum(
        (-1) ** (s + 1) * comb(n, s) * 2 ** (s * (n - s)) * dag_count(n - s)
        for s in range(1, n + 1)
    )


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_ORACLE_VARS:
        estimated = dag_count(n) if 0 < n <= 12 else float("inf")
        raise OracleSizeError(n, MAX_ORACLE_VARS, estimated)


def enumerate_dags(n: int) -> Iterator[tuple[int, ...]]:
    """Stream every labeled DAG on n nodes exactly once, as parent masks."""
    _check_n(n)
    par = [0] * n
    full = (1 << n) - 1

    def assign(sinks: list[int], pos: int, rest: int, uncovered: int) -> Iterator[None]:
        # rest: nodes available as parents; uncovered: inner sinks still
        # needing an outgoing edge into the remaining sink slots.
        if pos == len(sinks) - 1:
            optional = rest & ~uncovered
            for extra in iter_submasks(optional):
                par[sinks[pos]] = uncovered | extra
                yield
            return
        for choice in iter_submasks(rest):
            par[sinks[pos]] = choice
            yield from assign(sinks, pos + 1, rest, uncovered & ~choice)

    def rec(node_set: int) -> Iterator[int]:
        # Yields the sink mask of each DAG built over node_set (in `par`).
        if node_set == 0:
            yield 0
            return
        for sinks_mask in iter_submasks(node_set):
            if sinks_mask == 0:
                continue
            rest = node_set & ~sinks_mask
            sinks = list(iter_bits(sinks_mask))
            for inner_sinks in rec(rest):
                for _ in assign(sinks, 0, rest, inner_sinks):
                    yield sinks_mask

    for _ in rec(full):
        yield tuple(par)


class _StreamingLogSumExp:
    """Online log-sum-exp accumulator."""

    __slots__ = ("max", "acc")

    def __init__(self):
        self.max = float("-inf")
        self.acc = 0.0

    def add(self, x: float) -> None:
        if x <= self.max:
            self.acc += np.exp(x - self.max)
        else:
            self.acc = self.acc * np.exp(self.max - x) + 1.0 if self.acc else 1.0
            self.max = x

    def value(self) -> float:
        if self.max == float("-inf"):
            return float("-inf")
        return float(self.max + np.log(self.acc))


def _scored_stream(
    data: Dataset, ess: float, table: LocalScoreTable | None
) -> Iterator[tuple[tuple[int, ...], float]]:
    if table is None:
        table = all_local_scores(data, ess=ess)
    rows = [t.tolist() for t in table.scores]
    n = data.n
    low_masks = [(1 << i) - 1 for i in range(n)]
    for parents in enumerate_dags(n):
        total = 0.0
        for i in range(n):
            m = parents[i]
            total += rows[i][(m & low_masks[i]) | ((m >> (i + 1)) << i)]
        yield parents, total


def exact_log_evidence(
    data: Dataset, ess: float = 1.0, table: LocalScoreTable | None = None
) -> float:
    """Log of the total score mass over all DAGs (shared prior constant dropped)."""
    _check_n(data.n)
    acc = _StreamingLogSumExp()
    for _, score in _scored_stream(data, ess, table):
        acc.add(score)
    return acc.value()


def exact_feature_posteriors(
    data: Dataset,
    features: Iterable[Feature],
    ess: float = 1.0,
    table: LocalScoreTable | None = None,
) -> tuple[dict[Feature, float], float]:
    """Exact posteriors for several features in one enumeration pass.

    Returns (posteriors, log evidence).
    """
    _check_n(data.n)
    features = list(features)
    for f in features:
        f.check_range(data.n)
    total = _StreamingLogSumExp()
    hits = [_StreamingLogSumExp() for _ in features]
    for parents, score in _scored_stream(data, ess, table):
        total.add(score)
        for f, acc in zip(features, hits):
            if f.evaluate(parents):
                acc.add(score)
    log_pd = total.value()
    post = {
        f: float(np.exp(acc.value() - log_pd)) if acc.max != float("-inf") else 0.0
        for f, acc in zip(features, hits)
    }
    return post, log_pd


def exact_feature_posterior(
    data: Dataset, feature: Feature, ess: float = 1.0, table: LocalScoreTable | None = None
) -> float:
    """Exact posterior of one structural feature by full enumeration."""
    post, _ = exact_feature_posteriors(data, [feature], ess=ess, table=table)
    return post[feature]


def _encoding_key(parents: tuple[int, ...], n: int) -> int:
    # Lexicographic order over the parents array as a single integer;
    # parents[0] is most significant.
    key = 0
    for m in parents:
        key = (key << n) | m
    return key


def brute_topk(
    data: Dataset, k: int, ess: float = 1.0, table: LocalScoreTable | None = None
) -> list[ScoredNetwork]:
    """Exact top-k networks by full enumeration, canonical tie-break.

    Order matches the subset DP: score descending, then parents array
    ascending lexicographically.
    """
    _check_n(data.n)
    if k < 1:
        raise ValueError("k must be >= 1")
    n = data.n
    best = heapq.nlargest(
        k,
        _scored_stream(data, ess, table),
        key=lambda item: (item[1], -_encoding_key(item[0], n)),
    )
    return [
        ScoredNetwork(parents=parents, score=score, rank=r + 1)
        for r, (parents, score) in enumerate(best)
    ]
