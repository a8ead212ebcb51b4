"""Heterogeneous graph learning with size-aware meta-path handling.

Meta-paths are composed into target-type adjacencies and split into large
and small neighbor paths by degree statistics; large paths get their
neighbor sets filtered by transit probability times feature similarity
before per-path graph convolutions are fused with subgraph-level attention.
"""

from .graph import (
    GraphError,
    HetGraph,
    LabelSet,
    MetaPath,
    MetaPathError,
    Relation,
    add_reverse_relations,
    parse_metapath,
    relation_degrees,
    validate_graph,
)
from .metapaths import (
    MetaPathGraph,
    PathPartition,
    compose_metapath,
    degree_sums,
    discriminate,
    relative_differences,
)
from .filtering import (
    FilteredAdjacency,
    ImportanceScores,
    TransitMatrix,
    filter_large_path,
    importance_scores,
    metapath_transit,
    normalize_features,
    relation_transit,
    select_top,
)
from .nn import (
    Adam,
    Model,
    NormalizedAdjacency,
    cross_entropy,
    gradient_check,
    graph_conv,
    project_features,
    subgraph_attention,
    sym_normalize,
)
from .training import (
    DegreeStats,
    MetricsReport,
    Split,
    TrainConfig,
    degree_statistics,
    eval_classification,
    eval_clustering,
    make_split,
    perturb_graph,
    run_ablation,
    sweep,
    train,
)
from .bundle import (
    Bundle,
    BundleError,
    SynthSpec,
    load_bundle,
    noise_benchmark_spec,
    synth_generate,
    write_bundle,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "Bundle",
    "BundleError",
    "DegreeStats",
    "FilteredAdjacency",
    "GraphError",
    "HetGraph",
    "ImportanceScores",
    "LabelSet",
    "MetaPath",
    "MetaPathError",
    "MetaPathGraph",
    "MetricsReport",
    "Model",
    "NormalizedAdjacency",
    "PathPartition",
    "Relation",
    "Split",
    "SynthSpec",
    "TrainConfig",
    "TransitMatrix",
    "add_reverse_relations",
    "compose_metapath",
    "cross_entropy",
    "degree_statistics",
    "degree_sums",
    "discriminate",
    "eval_classification",
    "eval_clustering",
    "filter_large_path",
    "gradient_check",
    "graph_conv",
    "importance_scores",
    "load_bundle",
    "make_split",
    "metapath_transit",
    "noise_benchmark_spec",
    "normalize_features",
    "parse_metapath",
    "perturb_graph",
    "project_features",
    "relation_degrees",
    "relation_transit",
    "relative_differences",
    "run_ablation",
    "select_top",
    "subgraph_attention",
    "sweep",
    "sym_normalize",
    "synth_generate",
    "train",
    "validate_graph",
    "write_bundle",
]
