"""Multi-scale anomaly detection for sequences of node-labeled graphs.

A generative model with explicit community structure (GBTER) is fit to
observed snapshots; new snapshots are scored at graph, community, and node
granularity via Monte-Carlo p-values under two hierarchical detectors and
a Gaussian baseline.
"""

from .graphs import (
    GraphFormatError,
    GraphSequence,
    LabeledGraph,
    NodeLabel,
    Partition,
    Universe,
    WeightedAggregate,
    aggregate_counts,
    aggregate_exponential,
    load_edge_list,
    load_season_csv,
    load_sequence,
    save_edge_list,
    save_sequence,
    split_degree,
)
from .gbter import (
    GbterParams,
    edge_probability,
    excess_degrees,
    expected_adjacency,
    load_params,
    sample_graph,
    save_params,
    validate_chung_lu,
)
from .fitting import (
    BetaPosterior,
    GammaPosterior,
    MclConfig,
    MclResult,
    PosteriorState,
    fit_density,
    fit_expected_degree,
    fit_gbter,
    load_posterior,
    markov_cluster,
    save_posterior,
    update,
)
from .detectors import (
    ALL_DETECTORS,
    BASELINE,
    PROB,
    STATS,
    AnomalyReport,
    DetectorConfig,
    GaussianBaselineState,
    PipelineConfig,
    StreamPipeline,
    baseline_pvalue,
    baseline_stats,
    graph_log_prob,
    load_report,
    mc_pvalue,
    node_log_prob,
    power_iteration_spectral_norm,
    save_report,
    stats_node_log_prob,
    stats_node_pvalue_exact,
    stats_subgraph_log_prob,
    subgraph_log_prob,
)
from .experiments import (
    EvalCurve,
    EvalResult,
    ExperimentSpec,
    build_experiment1,
    build_experiment2,
    evaluate,
    run_experiment,
)

__version__ = "0.1.0"
