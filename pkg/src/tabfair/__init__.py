"""Fair tabular representations: mixed-space encoding, closed-form
sensitive-attribute removal, and group-fairness evaluation."""

from .dataset import (
    ColumnSchema,
    EncodedDataset,
    LevelMap,
    RawTable,
    SplitIndices,
    discretize_german_age,
    encode,
    load_csv,
    load_schema,
    load_split,
    save_split,
    stratified_split,
)
from .errors import (
    ConfigError,
    DataError,
    NumericalError,
    TabfairError,
    UndefinedMetricError,
)
from .evaluation import (
    FairnessReport,
    ProbeConfig,
    accuracy,
    disparate_impact,
    eighty_percent_rule,
    evaluate_representation,
    predict_label,
    predict_proba,
    roc_auc,
    statistical_parity_difference,
    train_probe,
)
from .fair_projection import (
    DebiasedRepresentation,
    FairProjectionConfig,
    build_sensitive_matrix,
    debias,
    select_k,
)
from .linalg import (
    SvdResult,
    explained_variance,
    load_matrix,
    projector,
    rank_k_svd,
    residualize,
    save_matrix,
)
from .mixed_encoder import (
    MixedEncoderConfig,
    MixedRepresentation,
    concatenate_latents,
    encode_dataset,
    extract_latent,
    train_mixed,
)
from .neuralnet import (
    AdamState,
    MlpConfig,
    MlpParams,
    TrainHistory,
    adam_step,
    backward,
    bce_loss,
    forward,
    init_params,
    load_mlp,
    mse_loss,
    save_mlp,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "ColumnSchema",
    "ConfigError",
    "DataError",
    "DebiasedRepresentation",
    "EncodedDataset",
    "FairProjectionConfig",
    "FairnessReport",
    "LevelMap",
    "MixedEncoderConfig",
    "MixedRepresentation",
    "MlpConfig",
    "MlpParams",
    "NumericalError",
    "ProbeConfig",
    "RawTable",
    "SplitIndices",
    "SvdResult",
    "TabfairError",
    "TrainHistory",
    "UndefinedMetricError",
    "accuracy",
    "adam_step",
    "backward",
    "bce_loss",
    "build_sensitive_matrix",
    "concatenate_latents",
    "debias",
    "discretize_german_age",
    "disparate_impact",
    "eighty_percent_rule",
    "encode",
    "encode_dataset",
    "evaluate_representation",
    "explained_variance",
    "extract_latent",
    "forward",
    "init_params",
    "load_csv",
    "load_matrix",
    "load_mlp",
    "load_schema",
    "load_split",
    "mse_loss",
    "predict_label",
    "predict_proba",
    "projector",
    "rank_k_svd",
    "residualize",
    "roc_auc",
    "save_matrix",
    "save_mlp",
    "save_split",
    "select_k",
    "statistical_parity_difference",
    "stratified_split",
    "train",
    "train_mixed",
    "train_probe",
]
