"""Log marginal-likelihood scores for (variable, parent set) pairs.

The score of a network decomposes into one term per node given its parents.
Each local term is the log Dirichlet-multinomial marginal likelihood of the
child column given the parent columns, with the total prior strength ``ess``
split uniformly over parameter cells: alpha_ijk = ess / (r_i * q_i) where
q_i is the product of the parent arities. Parent configurations unseen in the
data contribute exactly zero, so only observed configurations are touched.

The uniform prior over structures is a per-graph constant and is dropped
everywhere; all downstream quantities are ratios in which it cancels.
"""
from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .dataset import Dataset
from .errors import MemoryBudgetError
from .graphs import is_acyclic
from .masks import drop_bit, iter_bits

NEG_INF = float("-inf")


def _config_codes(data: Dataset, parent_idx: list[int]) -> tuple[np.ndarray, int]:
    """Mixed-radix configuration code per row, and the full configuration count."""
    codes = np.zeros(data.N, dtype=np.int64)
    q = 1
    for p in parent_idx:
        codes = codes * data.arities[p] + data.column(p)
        q *= data.arities[p]
    return codes, q


def _score_from_codes(codes: np.ndarray, q: int, child_col: np.ndarray, r: int, ess: float) -> float:
    """BDe local score given precomputed parent-configuration codes."""
    N = child_col.shape[0]
    if N == 0:
        return 0.0
    if q <= 4 * N:
        joint = np.bincount(codes * r + child_col, minlength=q * r).reshape(q, r)
        joint = joint[joint.any(axis=1)]
    else:
        uniq, inv = np.unique(codes, return_inverse=True)
        joint = np.bincount(inv * r + child_col, minlength=uniq.size * r).reshape(-1, r)
    margins = joint.sum(axis=1)
    a_jk = ess / (r * q)
    a_j = ess / q
    score = joint.shape[0] * gammaln(a_j) - gammaln(a_j + margins).sum()
    score += gammaln(a_jk + joint).sum() - joint.size * gammaln(a_jk)
    return float(score)


def local_score(data: Dataset, child: int, parent_mask: int, ess: float = 1.0) -> float:
    """Log marginal likelihood of ``child``'s column given the parent columns."""
    if ess <= 0:
        raise ValueError("ess must be positive")
    if not 0 <= child < data.n:
        raise ValueError(f"child index {child} out of range")
    if parent_mask & (1 << child):
        raise ValueError("child may not appear in its own parent set")
    if parent_mask >> data.n:
        raise ValueError("parent mask references variables outside the dataset")
    parent_idx = list(iter_bits(parent_mask))
    codes, q = _config_codes(data, parent_idx)
    return _score_from_codes(codes, q, data.column(child), data.arities[child], ess)


@dataclass
class LocalScoreTable:
    """Dense table of local scores for every (variable, parent set) pair.

    ``scores[i]`` has one float per parent set over V minus {i}, indexed by
    the parent mask with bit i removed. Entries beyond ``max_parents`` hold
    -inf sentinels; everything else is finite.
    """

    n: int
    ess: float
    max_parents: int | None
    scores: list[np.ndarray] = field(repr=False)

    def score(self, child: int, parent_mask: int) -> float:
        if parent_mask & (1 << child):
            raise ValueError("child may not appear in its own parent set")
        return float(self.scores[child][drop_bit(parent_mask, child)])

    def row(self, child: int) -> np.ndarray:
        """All parent-set scores for ``child``, indexed by compressed mask."""
        return self.scores[child]


def estimate_table_bytes(n: int) -> int:
    return n * (1 << (n - 1)) * 8


def all_local_scores(
    data: Dataset,
    ess: float = 1.0,
    max_parents: int | None = None,
    memory_budget: int | None = None,
    threads: int = 1,
) -> LocalScoreTable:
    """Compute local scores for all n * 2^(n-1) (child, parent set) pairs.

    Parent configurations are built incrementally while walking the subset
    lattice so each column is folded in once per subset; every cell still
    equals an independent ``local_score`` call.
    """
    if ess <= 0:
        raise ValueError("ess must be positive")
    n = data.n
    required = estimate_table_bytes(n)
    if memory_budget is not None and required > memory_budget:
        raise MemoryBudgetError("local score table", required, memory_budget)
    cap = n - 1 if max_parents is None else min(max_parents, n - 1)
    if cap < 0:
        raise ValueError("max_parents must be >= 0")
    tables = [np.full(1 << (n - 1), NEG_INF) for _ in range(n)]
    cols = [data.column(i) for i in range(n)]
    arities = data.arities

    def score_mask(mask: int, codes: np.ndarray, q: int) -> None:
        for child in range(n):
            if mask & (1 << child):
                continue
            tables[child][drop_bit(mask, child)] = _score_from_codes(
                codes, q, cols[child], arities[child], ess
            )

    def walk(mask: int, next_bit: int, codes: np.ndarray, q: int) -> None:
        score_mask(mask, codes, q)
        if mask.bit_count() >= cap:
            return
        for b in range(next_bit, n):
            walk(mask | (1 << b), b + 1, codes * arities[b] + cols[b], q * arities[b])

    empty = np.zeros(data.N, dtype=np.int64)
    if threads <= 1:
        walk(0, 0, empty, 1)
    else:
        score_mask(0, empty, 1)
        if cap > 0:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(walk, 1 << b, b + 1, empty * arities[b] + cols[b], arities[b])
                    for b in range(n)
                ]
                for f in futures:
                    f.result()
    return LocalScoreTable(n=n, ess=ess, max_parents=max_parents, scores=tables)


def network_score(parents: Sequence[int], table: LocalScoreTable) -> float:
    """Total log score of a DAG: the sum of its per-node local scores."""
    if len(parents) != table.n:
        raise ValueError(f"expected {table.n} parent sets, got {len(parents)}")
    if not is_acyclic(parents):
        raise ValueError("graph has a cycle")
    total = 0.0
    for child, mask in enumerate(parents):
        s = table.score(child, mask)
        if s == NEG_INF:
            raise ValueError(
                f"parent set of variable {child} exceeds the table's max_parents cap"
            )
        total += s
    return total


# ---------------------------------------------------------------------------
# Binary on-disk cache for LocalScoreTable.

_MAGIC = b"BNKSCOR1"


def save_score_table(path, table: LocalScoreTable, data: Dataset) -> None:
    """Write the table with a header binding it to the dataset and parameters."""
    digest = bytes.fromhex(data.content_hash())
    header = _MAGIC + struct.pack(
        "<Iid",
        table.n,
        -1 if table.max_parents is None else table.max_parents,
        table.ess,
    ) + digest
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            for arr in table.scores:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_score_table(
    path, data: Dataset, ess: float, max_parents: int | None
) -> LocalScoreTable | None:
    """Load a cached table; returns None unless the header matches exactly."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError:
        return None
    head_len = len(_MAGIC) + struct.calcsize("<Iid") + 32
    if len(blob) < head_len or not blob.startswith(_MAGIC):
        return None
    n, cap, file_ess = struct.unpack_from("<Iid", blob, len(_MAGIC))
    digest = blob[head_len - 32 : head_len]
    if n != data.n or file_ess != ess:
        return None
    if (max_parents is None) != (cap == -1) or (max_parents is not None and cap != max_parents):
        return None
    if digest != bytes.fromhex(data.content_hash()):
        return None
    per_var = 1 << (n - 1)
    expected = head_len + n * per_var * 8
    if len(blob) != expected:
        return None
    flat = np.frombuffer(blob, dtype="<f8", offset=head_len)
    scores = [flat[i * per_var : (i + 1) * per_var].astype(np.float64) for i in range(n)]
    return LocalScoreTable(n=n, ess=ess, max_parents=max_parents, scores=scores)
