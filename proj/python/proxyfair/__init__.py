"""Proxy demographic groups from embeddings."""

from ._core import (
    DataError,
    ParameterError,
    __version__,
    allocate_quotas,
    calibrate_bandwidth,
    cluster_balanced_sample,
    dbscan,
    fairness_gaps,
    gap_improvement,
    kde,
    load_embeddings,
    proportion_gap,
    random_sample,
    representation_gap,
    run_cli,
    save_embeddings,
    silverman_bandwidth,
    synthesize,
    target_total,
    tsne,
    tune_dbscan,
)

__all__ = [
    "DataError",
    "ParameterError",
    "__version__",
    "allocate_quotas",
    "calibrate_bandwidth",
    "cluster_balanced_sample",
    "dbscan",
    "fairness_gaps",
    "gap_improvement",
    "kde",
    "load_embeddings",
    "proportion_gap",
    "random_sample",
    "representation_gap",
    "run_cli",
    "save_embeddings",
    "silverman_bandwidth",
    "synthesize",
    "target_total",
    "tsne",
    "tune_dbscan",
]
