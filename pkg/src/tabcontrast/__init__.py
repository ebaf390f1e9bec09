"""Semi-supervised contrastive learning for tabular data.

The pipeline: encode mixed numerical/categorical rows, corrupt feature
subsets to make augmented views (optionally restricted to same-class rows,
with classes refreshed by pseudo-labeling), pretrain an encoder with a
contrastive objective, then fine-tune a classification head on the labeled
rows.  Boosted-tree feature-importance profiles can steer which features
get corrupted, and the evaluation layer compares method arms across
datasets and seeds.
"""

from .contrastive import cosine_sim, ntxent_loss, pair_index
from .corruption import (
    CorruptionContext,
    CorruptionPlan,
    ViewRow,
    corrupt,
    corrupt_batch,
)
from .correlation import (
    CorrMatrix,
    ImportanceProfile,
    build_profiles,
    correlation_value_range,
    load_profile,
    save_profile,
)
from .datasets import BUILTIN, get_builtin
from .evaluation import (
    MetricError,
    MetricSample,
    Projection3D,
    WinMatrix,
    accuracy,
    auroc,
    format_metric_table,
    format_win_matrix,
    pca_project,
    separation_ratio,
    welch_t_test,
    win_matrix,
    write_projection_csv,
)
from .gbdt import GbdtConfig, GbdtModel, fit_gbdt, importance_from_gains
from .masking import (
    sample_correlated_subset,
    sample_correlated_subsets_batch,
    step_probabilities,
)
from .neural import (
    AdamState,
    MlpSpec,
    ModelParams,
    NumericError,
    cross_entropy,
    encode,
    init_model,
    load_checkpoint,
    optimizer_step,
    predict_logits,
    project,
    save_checkpoint,
    softmax,
)
from .openml import FetchError, UnsupportedFeatureError, fetch_openml, parse_arff
from .runner import (
    ConfigError,
    RunManifest,
    RunStageError,
    execute,
    resolve_dataset,
    write_report,
)
from .store import ResultsStore, StoreError, record_key, to_samples
from .tabular import (
    Encoder1Hot,
    FeatureSpec,
    ParseError,
    Schema,
    SchemaError,
    SplitError,
    SplitSpec,
    Table,
    fit_encoder,
    load_table,
    make_split,
    read_csv_dataset,
    write_csv_dataset,
)
from .training import (
    DivergenceError,
    FinetuneResult,
    PseudoLabelState,
    RunRecord,
    TrainConfig,
    finetune,
    model_spec,
    pretrain,
    pseudo_label_accuracy,
    rng_streams,
    run_single,
    update_pseudo_labels,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BUILTIN",
    "ConfigError",
    "CorrMatrix",
    "CorruptionContext",
    "CorruptionPlan",
    "DivergenceError",
    "Encoder1Hot",
    "FeatureSpec",
    "FetchError",
    "FinetuneResult",
    "GbdtConfig",
    "GbdtModel",
    "ImportanceProfile",
    "MetricError",
    "MetricSample",
    "MlpSpec",
    "ModelParams",
    "NumericError",
    "ParseError",
    "Projection3D",
    "PseudoLabelState",
    "ResultsStore",
    "RunManifest",
    "RunRecord",
    "RunStageError",
    "Schema",
    "SchemaError",
    "SplitError",
    "SplitSpec",
    "StoreError",
    "Table",
    "TrainConfig",
    "UnsupportedFeatureError",
    "ViewRow",
    "WinMatrix",
    "accuracy",
    "auroc",
    "build_profiles",
    "correlation_value_range",
    "corrupt",
    "corrupt_batch",
    "cosine_sim",
    "cross_entropy",
    "encode",
    "execute",
    "fetch_openml",
    "finetune",
    "fit_encoder",
    "fit_gbdt",
    "format_metric_table",
    "format_win_matrix",
    "get_builtin",
    "importance_from_gains",
    "init_model",
    "load_checkpoint",
    "load_profile",
    "load_table",
    "make_split",
    "model_spec",
    "ntxent_loss",
    "optimizer_step",
    "pair_index",
    "parse_arff",
    "pca_project",
    "predict_logits",
    "pretrain",
    "project",
    "pseudo_label_accuracy",
    "read_csv_dataset",
    "record_key",
    "resolve_dataset",
    "rng_streams",
    "run_single",
    "sample_correlated_subset",
    "sample_correlated_subsets_batch",
    "save_checkpoint",
    "save_profile",
    "separation_ratio",
    "softmax",
    "step_probabilities",
    "to_samples",
    "update_pseudo_labels",
    "welch_t_test",
    "win_matrix",
    "write_csv_dataset",
    "write_projection_csv",
    "write_report",
]
