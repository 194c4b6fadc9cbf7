"""Command-line front end.

Subcommands: scores, kbest, features, predict, sample, evaluate, oracle.
Outputs are written atomically (temp file + rename). Exit codes: 0 success,
1 input error, 2 refusal (size/memory limits), 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import eval_harness, oracle, posterior
from .dataset import Dataset, load_csv
from .errors import DatasetError, MemoryBudgetError, OracleSizeError
from .kbest_dags import kbest_networks, networks_to_json, to_dot
from .kbest_parents import build_parent_table
from .posterior import Feature, build_report, ensemble, parse_feature
from .scoring import all_local_scores, load_score_table, save_score_table

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_REFUSED = 2
EXIT_USAGE = 64

ENV_MEMORY_BUDGET = "KBEST_BN_MEMORY_BUDGET"
ENV_THREADS = "KBEST_BN_THREADS"


@dataclass
class RunConfig:
    """Validated arguments for one CLI invocation."""

    command: str
    data: str | None = None
    new_data: str | None = None
    out: str | None = None
    dot_dir: str | None = None
    cache: str | None = None
    spec: str | None = None
    network_out: str | None = None
    from_network: str | None = None
    k: int = 1
    ess: float = 1.0
    max_parents: int | None = None
    seed: int = 0
    nodes: int = 0
    max_in_degree: int = 0
    rows: int = 0
    features: list[str] = field(default_factory=list)
    feature_delta: str = "auto"
    topk: int | None = None
    evidence: bool = False
    undirected: bool = False
    memory_budget: int | None = None
    threads: int = 1
    header: bool = False
    delimiter: str = ","

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.ess <= 0:
            raise ValueError("ess must be positive")
        for path in (self.data, self.new_data, self.spec, self.from_network):
            if path is not None and not os.path.isfile(path):
                raise FileNotFoundError(f"input file not found: {path}")
        for path in (self.out, self.network_out, self.cache):
            if path is not None:
                parent = os.path.dirname(os.path.abspath(path))
                if not os.path.isdir(parent):
                    raise FileNotFoundError(f"output directory not found: {parent}")
        if self.dot_dir is not None and not os.path.isdir(self.dot_dir):
            raise FileNotFoundError(f"DOT output directory not found: {self.dot_dir}")


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(config: RunConfig, payload: dict | list) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if config.out:
        _write_atomic(config.out, text)
    else:
        sys.stdout.write(text)


def _load_data(config: RunConfig, path: str | None = None) -> Dataset:
    return load_csv(path or config.data, has_header=config.header, delimiter=config.delimiter)


def _scores_for(config: RunConfig, data: Dataset):
    """Local-score table for the dataset, through the optional binary cache."""
    if config.cache:
        cached = load_score_table(config.cache, data, config.ess, config.max_parents)
        if cached is not None:
            return cached, 0.0
    t0 = time.perf_counter()
    table = all_local_scores(
        data,
        ess=config.ess,
        max_parents=config.max_parents,
        memory_budget=config.memory_budget,
        threads=config.threads,
    )
    elapsed = time.perf_counter() - t0
    if config.cache:
        save_score_table(config.cache, table, data)
    return table, elapsed


def _parse_features(config: RunConfig, data: Dataset) -> list[Feature]:
    if config.features:
        feats = [parse_feature(text, data.names) for text in config.features]
    else:
        feats = [
            Feature("directed_edge", u, v)
            for u in range(data.n)
            for v in range(data.n)
            if u != v
        ]
    for f in feats:
        f.check_range(data.n)
    return feats


def _kbest(config: RunConfig, data: Dataset):
    table, t_local = _scores_for(config, data)
    ptab = build_parent_table(table, config.k, memory_budget=config.memory_budget)
    nets = kbest_networks(ptab, config.k, memory_budget=config.memory_budget)
    return nets, t_local


def cmd_scores(config: RunConfig) -> int:
    data = _load_data(config)
    t0 = time.perf_counter()
    table = all_local_scores(
        data,
        ess=config.ess,
        max_parents=config.max_parents,
        memory_budget=config.memory_budget,
        threads=config.threads,
    )
    t_local = time.perf_counter() - t0
    if config.out:
        save_score_table(config.out, table, data)
    print(
        f"n={data.n} entries={data.n * (1 << (data.n - 1))} T_l={t_local:.4g}s",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_kbest(config: RunConfig) -> int:
    data = _load_data(config)
    t0 = time.perf_counter()
    nets, t_local = _kbest(config, data)
    ens = ensemble(nets)
    t_total = time.perf_counter() - t0
    payload = {
        "k": config.k,
        "ess": config.ess,
        "max_parents": config.max_parents,
        "lambda": posterior.lambda_ratio(ens),
        "networks": networks_to_json(nets, data.names),
    }
    _emit(config, payload)
    if config.dot_dir:
        width = len(str(len(nets)))
        for net in nets:
            dot_path = os.path.join(config.dot_dir, f"rank_{net.rank:0{width}d}.dot")
            _write_atomic(dot_path, to_dot(net, data.names))
    print(f"T_l={t_local:.4g}s T_t={t_total:.4g}s", file=sys.stderr)
    return EXIT_OK


def cmd_features(config: RunConfig) -> int:
    data = _load_data(config)
    nets, _ = _kbest(config, data)
    ens = ensemble(nets)
    feats = _parse_features(config, data)
    want_delta = config.feature_delta == "on" or (
        config.feature_delta == "auto" and data.n <= oracle.MAX_ORACLE_VARS
    )
    exact = oracle.exact_log_evidence(data, ess=config.ess) if want_delta else None
    report = build_report(ens, feats, ess=config.ess, exact_log_evidence=exact)
    _emit(config, report.to_json_dict(data.names))
    return EXIT_OK


def cmd_predict(config: RunConfig) -> int:
    data = _load_data(config)
    new_data = _load_data(config, config.new_data)
    nets, _ = _kbest(config, data)
    ens = ensemble(nets)
    value = posterior.predict(ens, data, new_data, ess=config.ess)
    _emit(config, {"log_predictive": value, "k": config.k, "ess": config.ess})
    return EXIT_OK


def cmd_sample(config: RunConfig) -> int:
    if config.from_network:
        with open(config.from_network, "r", encoding="utf-8") as fh:
            gold = eval_harness.GoldNetwork.from_json_dict(json.load(fh))
    else:
        if config.nodes < 1:
            raise DatasetError("--nodes is required unless --from-network is given")
        gold = eval_harness.random_gold_network(
            config.nodes, config.max_in_degree, config.seed
        )
    data = eval_harness.sample(gold, config.rows, config.seed + 1)
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=config.delimiter)
    if config.header:
        writer.writerow(data.names)
    for row in data.rows:
        writer.writerow([data.categories[i][code] for i, code in enumerate(row)])
    if config.out:
        _write_atomic(config.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if config.network_out:
        _write_atomic(
            config.network_out,
            json.dumps({"seed": config.seed, **gold.to_json_dict()}, indent=2) + "\n",
        )
    print(f"sampled N={data.N} n={data.n} seed={config.seed}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(config: RunConfig) -> int:
    with open(config.spec, "r", encoding="utf-8") as fh:
        spec = eval_harness.ExperimentSpec.from_json_dict(json.load(fh))
    if config.undirected:
        spec.undirected = True
    rows = eval_harness.run_experiment(spec)
    text = eval_harness.experiment_rows_to_csv(spec, rows)
    if config.out:
        _write_atomic(config.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(config: RunConfig) -> int:
    data = _load_data(config)
    payload: dict = {"n": data.n, "ess": config.ess}
    if config.topk:
        nets = oracle.brute_topk(data, config.topk, ess=config.ess)
        payload["topk"] = networks_to_json(nets, data.names)
    feats = [parse_feature(text, data.names) for text in config.features]
    if feats:
        post, log_pd = oracle.exact_feature_posteriors(data, feats, ess=config.ess)
        payload["log_evidence"] = log_pd
        payload["features"] = [
            {"kind": f.kind, "u": data.names[f.u], "v": data.names[f.v], "posterior": post[f]}
            for f in feats
        ]
    elif config.evidence or not config.topk:
        payload["log_evidence"] = oracle.exact_log_evidence(data, ess=config.ess)
    _emit(config, payload)
    return EXIT_OK


_COMMANDS = {
    "scores": cmd_scores,
    "kbest": cmd_kbest,
    "features": cmd_features,
    "predict": cmd_predict,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "oracle": cmd_oracle,
}


def run(config: RunConfig) -> int:
    """Execute one validated command; raises on error (see main for codes)."""
    return _COMMANDS[config.command](config)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kbest-bn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data=True):
        if data:
            p.add_argument("--data", required=True, help="input CSV of categorical values")
        p.add_argument("--ess", type=float, default=1.0, help="prior strength (default 1)")
        p.add_argument("--header", action="store_true", help="first CSV row holds names")
        p.add_argument("--delimiter", default=",")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument(
            "--memory-budget",
            type=int,
            default=None,
            help=f"max bytes per table (env {ENV_MEMORY_BUDGET})",
        )
        p.add_argument(
            "--threads", type=int, default=None, help=f"scoring workers (env {ENV_THREADS})"
        )

    p = sub.add_parser("scores", help="compute (and cache) the local-score table")
    add_common(p)
    p.add_argument("--max-parents", type=int, default=None)

    p = sub.add_parser("kbest", help="find the k best networks")
    add_common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--dot-dir", help="write one Graphviz file per network")
    p.add_argument("--cache", help="binary local-score cache to reuse or create")

    p = sub.add_parser("features", help="feature posteriors from the k best networks")
    add_common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--cache")
    p.add_argument(
        "--features",
        default="",
        help="comma-separated kind:u:v (edge, adj, path, mb); default all directed edges",
    )
    p.add_argument(
        "--delta",
        dest="feature_delta",
        choices=("auto", "on", "off"),
        default="auto",
        help="attach exhaustive-averaging delta and bounds (auto: only small n)",
    )

    p = sub.add_parser("predict", help="log predictive probability of held-out data")
    add_common(p)
    p.add_argument("--new", dest="new_data", required=True, help="held-out CSV")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--cache")

    p = sub.add_parser("sample", help="sample a dataset from a gold network")
    add_common(p, data=False)
    p.add_argument("--nodes", type=int, default=0)
    p.add_argument("--max-in-degree", type=int, default=0)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--network-out", help="write the gold network as JSON")
    p.add_argument("--from-network", help="sample from an existing gold-network JSON")

    p = sub.add_parser("evaluate", help="run an experiment spec (JSON) to CSV")
    add_common(p, data=False)
    p.add_argument("--spec", required=True)
    p.add_argument("--undirected", action="store_true")

    p = sub.add_parser("oracle", help="exhaustive ground truth for small n")
    add_common(p)
    p.add_argument("--features", default="", help="comma-separated kind:u:v")
    p.add_argument("--topk", type=int, default=None)
    p.add_argument("--evidence", action="store_true")

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    memory_budget = getattr(args, "memory_budget", None)
    if memory_budget is None and os.environ.get(ENV_MEMORY_BUDGET):
        memory_budget = int(os.environ[ENV_MEMORY_BUDGET])
    threads = getattr(args, "threads", None)
    if threads is None:
        threads = int(os.environ.get(ENV_THREADS, "1"))
    features = [f for f in getattr(args, "features", "").split(",") if f]
    return RunConfig(
        command=args.command,
        data=getattr(args, "data", None),
        new_data=getattr(args, "new_data", None),
        out=getattr(args, "out", None),
        dot_dir=getattr(args, "dot_dir", None),
        cache=getattr(args, "cache", None),
        spec=getattr(args, "spec", None),
        network_out=getattr(args, "network_out", None),
        from_network=getattr(args, "from_network", None),
        k=getattr(args, "k", 1),
        ess=getattr(args, "ess", 1.0),
        max_parents=getattr(args, "max_parents", None),
        seed=getattr(args, "seed", 0),
        nodes=getattr(args, "nodes", 0),
        max_in_degree=getattr(args, "max_in_degree", 0),
        rows=getattr(args, "rows", 0),
        features=features,
        feature_delta=getattr(args, "feature_delta", "auto"),
        topk=getattr(args, "topk", None),
        evidence=getattr(args, "evidence", False),
        undirected=getattr(args, "undirected", False),
        memory_budget=memory_budget,
        threads=threads,
        header=getattr(args, "header", False),
        delimiter=getattr(args, "delimiter", ","),
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        return run(config)
    except (MemoryBudgetError, OracleSizeError) as exc:
        detail = {"error": str(exc), "kind": "refusal"}
        if isinstance(exc, MemoryBudgetError):
            detail.update(
                required_bytes=exc.required_bytes, budget_bytes=exc.budget_bytes, what=exc.what
            )
        else:
            detail.update(n=exc.n, limit=exc.limit)
        print(json.dumps(detail), file=sys.stderr)
        return EXIT_REFUSED
    except (DatasetError, FileNotFoundError, ValueError, ArithmeticError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": str(exc), "kind": "input"}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
