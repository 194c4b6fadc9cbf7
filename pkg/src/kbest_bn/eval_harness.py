"""Synthetic-benchmark machinery: gold networks, sampling, ROC, equivalence.

A gold network is a known DAG with conditional probability tables; datasets
are drawn from it by ancestral sampling, structure learners are scored by
ROC/AUC of their edge posteriors against the gold edges, and learned network
lists can be grouped into independence-equivalence classes (same skeleton and
colliders).
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, from_codes
from .graphs import is_acyclic, skeleton, topological_order, v_structures
from .kbest_dags import ScoredNetwork, kbest_networks
from .kbest_parents import build_parent_table
from .masks import iter_bits
from .oracle import MAX_ORACLE_VARS, exact_log_evidence
from .posterior import Feature, delta, ensemble, feature_posterior, lambda_ratio
from .scoring import all_local_scores


@dataclass
class GoldNetwork:
    """A known structure with one conditional table per node.

    ``cpts[i]`` has shape (q_i, r_i): one row per parent configuration in
    mixed-radix order (ascending parent index, first parent most significant);
    rows sum to one.
    """

    parents: tuple[int, ...]
    arities: tuple[int, ...]
    cpts: list[np.ndarray] = field(repr=False)

    def __post_init__(self):
        if not is_acyclic(self.parents):
            raise ValueError("gold network structure has a cycle")
        for i, (mask, r) in enumerate(zip(self.parents, self.arities)):
            q = 1
            for p in iter_bits(mask):
                q *= self.arities[p]
            cpt = self.cpts[i]
            if cpt.shape != (q, r):
                raise ValueError(f"node {i}: CPT shape {cpt.shape}, expected {(q, r)}")
            if (cpt < 0).any():
                raise ValueError(f"node {i}: negative probability")
            if np.abs(cpt.sum(axis=1) - 1.0).max() > 1e-12:
                raise ValueError(f"node {i}: CPT rows must sum to 1")

    @property
    def n(self) -> int:
        return len(self.parents)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f"v{i}" for i in range(self.n))

    def edges(self) -> set[tuple[int, int]]:
        """Directed edges (u, v) meaning u -> v."""
        return {(u, v) for v, mask in enumerate(self.parents) for u in iter_bits(mask)}

    def to_json_dict(self) -> dict:
        return {
            "arities": list(self.arities),
            "parents": [sorted(iter_bits(m)) for m in self.parents],
            "cpts": [cpt.tolist() for cpt in self.cpts],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GoldNetwork":
        masks = tuple(sum(1 << p for p in ps) for ps in obj["parents"])
        return cls(
            parents=masks,
            arities=tuple(int(r) for r in obj["arities"]),
            cpts=[np.asarray(c, dtype=float) for c in obj["cpts"]],
        )


def random_gold_network(n: int, max_in_degree: int, seed, arity: int = 2) -> GoldNetwork:
    """Random structure over a random node order with Dirichlet(1) CPT rows.

    Deterministic per seed (PCG64).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_in_degree >= n:
        raise ValueError("max_in_degree must be < n")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    parents = [0] * n
    for pos in range(n):
        node = int(order[pos])
        limit = min(max_in_degree, pos)
        d = int(rng.integers(0, limit + 1))
        if d:
            chosen = rng.choice(order[:pos], size=d, replace=False)
            parents[node] = int(sum(1 << int(p) for p in chosen))
    arities = tuple(arity for _ in range(n))
    cpts = []
    for i in range(n):
        q = 1
        for p in iter_bits(parents[i]):
            q *= arities[p]
        cpts.append(rng.dirichlet(np.ones(arities[i]), size=q))
    return GoldNetwork(parents=tuple(parents), arities=arities, cpts=cpts)


def sample(gold: GoldNetwork, m: int, seed) -> Dataset:
    """Draw m records by ancestral sampling in topological order."""
    if m < 0:
        raise ValueError("m must be >= 0")
    rng = np.random.default_rng(seed)
    n = gold.n
    rows = np.zeros((m, n), dtype=np.int32)
    order = topological_order(gold.parents)
    for node in order:
        pa = sorted(iter_bits(gold.parents[node]))
        if pa:
            codes = np.zeros(m, dtype=np.int64)
            for p in pa:
                codes = codes * gold.arities[p] + rows[:, p]
        else:
            codes = np.zeros(m, dtype=np.int64)
        probs = gold.cpts[node][codes]  # (m, r)
        u = rng.random(m)
        rows[:, node] = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    rows = np.minimum(rows, np.asarray(gold.arities, dtype=np.int32) - 1)
    return from_codes(gold.names, gold.arities, rows)


@dataclass
class RocCurve:
    """Threshold-sweep operating points from (0,0) to (1,1), plus the area."""

    points: list[tuple[float, float]]
    auc: float


def roc_auc(scores: Mapping, truth: set) -> RocCurve:
    """ROC of candidate scores against a truth set over the same keys.

    Sweeps the distinct score values descending; ties move as one block.
    """
    keys = list(scores)
    if not truth:
        raise ValueError("truth set is empty; both classes are required")
    if not set(truth) <= set(keys):
        raise ValueError("truth contains keys outside the candidate space")
    pos = sum(1 for key in keys if key in truth)
    neg = len(keys) - pos
    if neg == 0:
        raise ValueError("truth covers every candidate; both classes are required")
    ranked = sorted(keys, key=lambda key: -scores[key])
    points = [(0.0, 0.0)]
    tp = fp = 0
    idx = 0
    while idx < len(ranked):
        threshold = scores[ranked[idx]]
        while idx < len(ranked) and scores[ranked[idx]] == threshold:
            if ranked[idx] in truth:
                tp += 1
            else:
                fp += 1
            idx += 1
        points.append((fp / neg, tp / pos))
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    return RocCurve(points=points, auc=float(np.trapezoid(ys, xs)))


@dataclass
class EquivalenceClass:
    """Networks sharing skeleton and colliders (and hence the same score)."""

    member_ranks: list[int]
    skeleton: frozenset[tuple[int, int]]
    v_structures: frozenset[tuple[int, int, int]]


def group_equivalence_classes(networks: Sequence[ScoredNetwork]) -> list[EquivalenceClass]:
    """Partition a ranked network list into independence-equivalence classes."""
    if not networks:
        raise ValueError("no networks to group")
    classes: dict[tuple, EquivalenceClass] = {}
    for net in networks:
        key_sk = skeleton(net.parents)
        key_vs = v_structures(net.parents)
        cls = classes.get((key_sk, key_vs))
        if cls is None:
            classes[(key_sk, key_vs)] = EquivalenceClass(
                member_ranks=[net.rank], skeleton=key_sk, v_structures=key_vs
            )
        else:
            cls.member_ranks.append(net.rank)
    return sorted(classes.values(), key=lambda c: min(c.member_ranks))


def class_skeleton_diff(a: EquivalenceClass, b: EquivalenceClass) -> int:
    """Number of undirected edges present in exactly one of the two classes."""
    return len(a.skeleton ^ b.skeleton)


# ---------------------------------------------------------------------------
# Experiment runner: sample -> learn -> edge ROC, over replicates.


@dataclass
class ExperimentSpec:
    n: int
    max_in_degree: int
    m_list: list[int]
    k_list: list[int]
    replicates: int
    seed: int
    ess: float = 1.0
    undirected: bool = False

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentSpec":
        return cls(
            n=int(obj["n"]),
            max_in_degree=int(obj["max_in_degree"]),
            m_list=[int(m) for m in obj["m_list"]],
            k_list=[int(k) for k in obj["k_list"]],
            replicates=int(obj["replicates"]),
            seed=int(obj["seed"]),
            ess=float(obj.get("ess", 1.0)),
            undirected=bool(obj.get("undirected", False)),
        )


def edge_posterior_scores(ens, n: int, undirected: bool = False) -> dict:
    """Posterior per candidate edge: directed pairs, or adjacency per pair."""
    scores = {}
    if undirected:
        for u in range(n):
            for v in range(u + 1, n):
                scores[(u, v)] = feature_posterior(ens, Feature("adjacency", u, v))
    else:
        for u in range(n):
            for v in range(n):
                if u != v:
                    scores[(u, v)] = feature_posterior(ens, Feature("directed_edge", u, v))
    return scores


def gold_truth(gold: GoldNetwork, undirected: bool = False) -> set:
    if undirected:
        return {tuple(sorted(e)) for e in gold.edges()}
    return gold.edges()


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """One row per (replicate, m, k): AUC, quality diagnostics, wall-clock."""
    root = np.random.SeedSequence(spec.seed)
    gold = random_gold_network(spec.n, spec.max_in_degree, root.spawn(1)[0])
    truth = gold_truth(gold, spec.undirected)
    rows = []
    for rep in range(spec.replicates):
        for mi, m in enumerate(spec.m_list):
            data_seed = np.random.SeedSequence([spec.seed, rep, mi])
            data = sample(gold, m, data_seed)
            exact = (
                exact_log_evidence(data, ess=spec.ess)
                if spec.n <= MAX_ORACLE_VARS
                else None
            )
            for k in spec.k_list:
                t0 = time.perf_counter()
                table = all_local_scores(data, ess=spec.ess)
                ptab = build_parent_table(table, k)
                nets = kbest_networks(ptab, k)
                ens = ensemble(nets)
                scores = edge_posterior_scores(ens, spec.n, spec.undirected)
                elapsed = time.perf_counter() - t0
                curve = roc_auc(scores, truth)
                rows.append(
                    {
                        "replicate": rep,
                        "m": m,
                        "k": k,
                        "auc": curve.auc,
                        "delta": delta(ens, exact) if exact is not None else "",
                        "lambda": lambda_ratio(ens),
                        "seconds": elapsed,
                    }
                )
    return rows


def experiment_rows_to_csv(spec: ExperimentSpec, rows: list[dict]) -> str:
    """Plot-ready CSV with the run configuration recorded in a comment line."""
    mode = "undirected" if spec.undirected else "directed"
    out = [
        f"# n={spec.n} max_in_degree={spec.max_in_degree} replicates={spec.replicates} "
        f"seed={spec.seed} ess={spec.ess} edge_mode={mode}",
        "replicate,m,k,auc,delta,lambda,seconds",
    ]
    for r in rows:
        out.append(
            f"{r['replicate']},{r['m']},{r['k']},{r['auc']!r},{r['delta']!r},"
            f"{r['lambda']!r},{r['seconds']:.3f}"
        )
    return "\n".join(out) + "\n"
