"""Bayesian model averaging over a ranked set of networks.

Weights renormalize the joint scores within the retained set, so each weight
upper-bounds the network's true posterior. Structural features average the
indicator over the set; data prediction averages each network's posterior
predictive, obtained by rescoring on pooled data. Two quality diagnostics are
exposed: delta, the exact posterior mass the set captures (needs an exact
evidence value), and lambda, the best-to-worst posterior ratio within the
set, which is independent of the dropped structure-prior constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dataset import Dataset, concat, reencode
from .errors import SchemaMismatchError
from .graphs import ancestors
from .kbest_dags import ScoredNetwork
from .masks import iter_bits
from .scoring import local_score

FEATURE_KINDS = ("directed_edge", "adjacency", "directed_path", "markov_blanket")

# Advisory best-to-worst ratio above which the retained set is considered to
# dominate the posterior; reported, never enforced.
LAMBDA_CUTOFF = 20.0


@dataclass(frozen=True)
class Feature:
    """A binary structural feature of a DAG, evaluable on parent masks."""

    kind: str
    u: int
    v: int

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.u == self.v:
            raise ValueError("feature endpoints must differ")
        if self.u < 0 or self.v < 0:
            raise ValueError("feature endpoints must be variable indices")

    def check_range(self, n: int) -> None:
        if self.u >= n or self.v >= n:
            raise ValueError(f"feature {self} references variables outside 0..{n - 1}")

    def evaluate(self, parents) -> bool:
        u, v = self.u, self.v
        if self.kind == "directed_edge":
            return bool(parents[v] & (1 << u))
        if self.kind == "adjacency":
            return bool(parents[v] & (1 << u)) or bool(parents[u] & (1 << v))
        if self.kind == "directed_path":
            return bool(ancestors(parents, v) & (1 << u))
        # markov_blanket: v is a parent, child, or co-parent of u
        if parents[u] & (1 << v) or parents[v] & (1 << u):
            return True
        uv = (1 << u) | (1 << v)
        return any(mask & uv == uv for mask in parents)


_SHORT = {"edge": "directed_edge", "adj": "adjacency", "path": "directed_path",
          "mb": "markov_blanket"}


def parse_feature(text: str, names=None) -> Feature:
    """Parse 'kind:u:v' where u, v are variable names or indices."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"feature {text!r} is not of the form kind:u:v")
    kind = _SHORT.get(parts[0], parts[0])

    def resolve(token: str) -> int:
        if names is not None and token in names:
            return list(names).index(token)
        try:
            return int(token)
        except ValueError:
            raise ValueError(f"unknown variable {token!r} in feature {text!r}") from None

    return Feature(kind=kind, u=resolve(parts[1]), v=resolve(parts[2]))


@dataclass
class WeightedEnsemble:
    """Networks with normalized log weights and their total log mass."""

    networks: list[ScoredNetwork]
    log_weights: np.ndarray = field(repr=False)
    log_mass: float = 0.0

    @property
    def n(self) -> int:
        return len(self.networks[0].parents)

    @property
    def k(self) -> int:
        return len(self.networks)

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def ensemble(networks: list[ScoredNetwork]) -> WeightedEnsemble:
    """Normalize the networks' scores into posterior weights over the set."""
    if not networks:
        raise ValueError("cannot build an ensemble from an empty network list")
    scores = np.array([net.score for net in networks])
    if not np.all(np.isfinite(scores)):
        raise ValueError("network scores must be finite")
    if np.any(np.diff(scores) > 0):
        raise ValueError("networks must be ordered by score, best first")
    log_mass = float(logsumexp(scores))
    return WeightedEnsemble(
        networks=list(networks), log_weights=scores - log_mass, log_mass=log_mass
    )


def feature_posterior(ens: WeightedEnsemble, feature: Feature) -> float:
    """Weighted fraction of ensemble networks containing the feature."""
    feature.check_range(ens.n)
    hits = np.fromiter(
        (feature.evaluate(net.parents) for net in ens.networks), dtype=bool, count=ens.k
    )
    if not hits.any():
        return 0.0
    return float(min(1.0, np.exp(logsumexp(ens.log_weights[hits]))))


def delta(ens: WeightedEnsemble, exact_log_evidence: float) -> float:
    """Exact posterior mass captured by the ensemble, in (0, 1].

    Both sides must drop the same uniform structure-prior constant (they do
    throughout this package, so it cancels).
    """
    d = float(np.exp(ens.log_mass - exact_log_evidence))
    if d > 1.0 + 1e-6:
        raise ArithmeticError(
            f"ensemble mass exceeds the exact evidence (delta={d}); "
            "scores were probably computed on different data or parameters"
        )
    return min(d, 1.0)


def lambda_ratio(ens: WeightedEnsemble) -> float:
    """Posterior ratio of the best network to the worst retained network."""
    return float(np.exp(ens.networks[0].score - ens.networks[-1].score))


def bounds(p_hat: float, delta_value: float) -> tuple[float, float]:
    """Two-sided envelope for the exact posterior given the captured mass."""
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError("p_hat must lie in [0, 1]")
    if not 0.0 < delta_value <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    return delta_value * p_hat, delta_value * p_hat + 1.0 - delta_value


def predict(
    ens: WeightedEnsemble, data: Dataset, new_data: Dataset, ess: float = 1.0
) -> float:
    """Log posterior-predictive probability of ``new_data`` given ``data``.

    Each network is rescored from scratch on the pooled rows; the per-network
    log ratios are then mixed with the ensemble weights. Always <= 0.
    """
    if data.names != new_data.names:
        raise SchemaMismatchError(
            f"prediction data schema differs: {new_data.names} vs {data.names}"
        )
    pooled = concat(new_data, data)
    base = reencode(data, pooled.categories)
    cache: dict[tuple[int, int], float] = {}

    def ratio(child: int, mask: int) -> float:
        key = (child, mask)
        got = cache.get(key)
        if got is None:
            got = local_score(pooled, child, mask, ess) - local_score(base, child, mask, ess)
            cache[key] = got
        return got

    terms = np.array(
        [
            lw + sum(ratio(child, mask) for child, mask in enumerate(net.parents))
            for lw, net in zip(ens.log_weights, ens.networks)
        ]
    )
    result = float(logsumexp(terms))
    if result > 1e-9:
        raise ArithmeticError(f"log predictive {result} > 0; inconsistent inputs")
    return min(result, 0.0)


@dataclass
class PosteriorReport:
    """Feature posteriors with quality diagnostics and optional bounds."""

    estimates: dict[Feature, float]
    lambda_ratio: float
    k: int
    ess: float
    delta: float | None = None
    bounds: dict[Feature, tuple[float, float]] = field(default_factory=dict)

    def to_json_dict(self, names) -> dict:
        feats = []
        for f, p in self.estimates.items():
            lo, hi = self.bounds.get(f, (None, None))
            feats.append(
                {
                    "kind": f.kind,
                    "u": names[f.u],
                    "v": names[f.v],
                    "p_hat": p,
                    "lower": lo,
                    "upper": hi,
                }
            )
        return {
            "features": feats,
            "delta": self.delta,
            "lambda": self.lambda_ratio,
            "lambda_exceeds_cutoff": self.lambda_ratio >= LAMBDA_CUTOFF,
            "k": self.k,
            "ess": self.ess,
        }


def build_report(
    ens: WeightedEnsemble,
    features: list[Feature],
    ess: float,
    exact_log_evidence: float | None = None,
) -> PosteriorReport:
    estimates = {f: feature_posterior(ens, f) for f in features}
    d = None if exact_log_evidence is None else delta(ens, exact_log_evidence)
    b = {} if d is None else {f: bounds(p, d) for f, p in estimates.items()}
    return PosteriorReport(
        estimates=estimates,
        lambda_ratio=lambda_ratio(ens),
        k=ens.k,
        ess=ess,
        delta=d,
        bounds=b,
    )
