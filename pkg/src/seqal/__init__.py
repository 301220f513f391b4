"""Pool-based active learning for token-level sequence labeling.

Query strategies (uncertainty, diversity and gradient-embedding
hybrids), a small bidirectional recurrent tagger trained from scratch
each round, the round-based experiment loop, and a human-in-the-loop
annotation service.
"""

from .corpus import (
    Chunk,
    ConllParseError,
    Dataset,
    GenConfig,
    LabeledSequence,
    LabelSet,
    Pool,
    chunk_f1,
    dataset_from_conll,
    dataset_from_json,
    dataset_to_json,
    extract_chunks,
    generate_synthetic,
    parse_conll,
    to_conll,
)
from .estimator import SequenceTagger
from .loop import (
    AggregatePoint,
    ConfigError,
    DatasetSource,
    ExperimentConfig,
    LearningCurve,
    RoundRecord,
    aggregate_runs,
    aggregate_to_csv,
    config_from_dict,
    config_to_dict,
    curve_from_json,
    curve_to_csv,
    curve_to_json,
    load_dataset,
    run_experiment,
    run_repeats,
    simulated_oracle,
)
from .strategies import (
    STRATEGIES,
    Budget,
    GradientEmbedding,
    QueryBatch,
    bald_disagreement,
    coreset_select,
    gradient_embedding,
    kmeanspp_select,
    length_weights,
    mnlp_score,
    select_batch,
    sequence_embedding,
)
from .tagger import (
    TaggerConfig,
    TaggerParams,
    forward,
    init_params,
    loss_nll,
    mc_forward,
    params_from_json,
    params_to_json,
    predict,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AggregatePoint",
    "Budget",
    "Chunk",
    "ConfigError",
    "ConllParseError",
    "Dataset",
    "DatasetSource",
    "ExperimentConfig",
    "GenConfig",
    "GradientEmbedding",
    "LabelSet",
    "LabeledSequence",
    "LearningCurve",
    "Pool",
    "QueryBatch",
    "RoundRecord",
    "STRATEGIES",
    "SequenceTagger",
    "TaggerConfig",
    "TaggerParams",
    "aggregate_runs",
    "aggregate_to_csv",
    "bald_disagreement",
    "chunk_f1",
    "config_from_dict",
    "config_to_dict",
    "coreset_select",
    "curve_from_json",
    "curve_to_csv",
    "curve_to_json",
    "dataset_from_conll",
    "dataset_from_json",
    "dataset_to_json",
    "extract_chunks",
    "forward",
    "generate_synthetic",
    "gradient_embedding",
    "init_params",
    "kmeanspp_select",
    "length_weights",
    "load_dataset",
    "loss_nll",
    "mc_forward",
    "mnlp_score",
    "params_from_json",
    "params_to_json",
    "parse_conll",
    "predict",
    "run_experiment",
    "run_repeats",
    "select_batch",
    "sequence_embedding",
    "simulated_oracle",
    "to_conll",
    "train",
]
