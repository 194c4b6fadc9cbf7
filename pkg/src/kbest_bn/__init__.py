"""k-best Bayesian network structures with Bayesian model averaging.

Find the k highest-scoring structures of a discrete Bayesian network exactly
by dynamic programming, then average structural-feature and prediction
queries over them, with quality diagnostics and exhaustive ground truth for
small variable counts.
"""
from .dataset import ContingencyTable, Dataset, concat, count_table, from_codes, from_records, load_csv
from .errors import DatasetError, MemoryBudgetError, OracleSizeError, SchemaMismatchError
from .eval_harness import (
    EquivalenceClass,
    ExperimentSpec,
    GoldNetwork,
    RocCurve,
    class_skeleton_diff,
    group_equivalence_classes,
    random_gold_network,
    roc_auc,
    run_experiment,
    sample,
)
from .kbest_dags import (
    LatticeNode,
    NetQueue,
    ScoredNetwork,
    SearchStats,
    best_with_sink,
    kbest_networks,
    lattice_value,
)
from .kbest_parents import (
    ParentQueue,
    ParentTable,
    VariableParentTable,
    best_parents,
    build_parent_table,
    merge_queues,
)
from .oracle import (
    brute_topk,
    dag_count,
    enumerate_dags,
    exact_feature_posterior,
    exact_feature_posteriors,
    exact_log_evidence,
)
from .posterior import (
    Feature,
    PosteriorReport,
    WeightedEnsemble,
    bounds,
    build_report,
    delta,
    ensemble,
    feature_posterior,
    lambda_ratio,
    parse_feature,
    predict,
)
from .scoring import (
    LocalScoreTable,
    all_local_scores,
    load_score_table,
    local_score,
    network_score,
    save_score_table,
)

__version__ = "0.1.0"
