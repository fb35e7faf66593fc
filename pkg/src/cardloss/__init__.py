"""Point-cloud cardinality invariants (magnitude, spread) as training losses."""

from .errors import (
    CardlossError,
    CsvFormatError,
    DivergenceError,
    InvalidArgumentError,
    InvalidSpecError,
    SingularSimilarityError,
    UndefinedMetricError,
)
from .invariants import (
    DEDUP_TOL,
    DistanceMatrix,
    PointCloud,
    SimilarityMatrix,
    Weighting,
    dedup,
    diameter,
    distance_matrix,
    magnitude,
    magnitude_gradient,
    scale_scan,
    similarity_matrix,
    solve_weighting,
    spread,
    spread_gradient,
)
from .losses import (
    CLASSIFICATION_LOSSES,
    LossResult,
    PredictionBatch,
    TripletBatch,
    TripletLossResult,
    cce_loss,
    contrastive_base_loss,
    division_magnitude_loss,
    division_spread_loss,
    magnitude_loss,
    mse_loss,
    spread_loss,
    welsch_leclerc,
)
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    accuracy,
    confusion_matrix,
    evaluate,
    f1_scores,
    one_hot,
    pr_auc,
    pr_auc_macro,
)
from .nn import (
    EpochRecord,
    MLPModel,
    TrainConfig,
    TrainTrace,
    forward,
    init_model,
    loss_gradients,
    train,
    train_step,
)
from .synthdata import (
    Dataset,
    DatasetSpec,
    SplitDataset,
    generate,
    load_csv,
    per_class_counts,
    save_csv,
    split,
)

__version__ = "0.1.0"

__all__ = [
    "CardlossError", "CsvFormatError", "DivergenceError", "InvalidArgumentError",
    "InvalidSpecError", "SingularSimilarityError", "UndefinedMetricError",
    "DEDUP_TOL", "DistanceMatrix", "PointCloud", "SimilarityMatrix", "Weighting",
    "dedup", "diameter", "distance_matrix", "magnitude", "magnitude_gradient",
    "scale_scan", "similarity_matrix", "solve_weighting", "spread", "spread_gradient",
    "CLASSIFICATION_LOSSES", "LossResult", "PredictionBatch", "TripletBatch",
    "TripletLossResult", "cce_loss", "contrastive_base_loss",
    "division_magnitude_loss", "division_spread_loss", "magnitude_loss",
    "mse_loss", "spread_loss", "welsch_leclerc",
    "ConfusionMatrix", "MetricsReport", "accuracy", "confusion_matrix", "evaluate",
    "f1_scores", "one_hot", "pr_auc", "pr_auc_macro",
    "EpochRecord", "MLPModel", "TrainConfig", "TrainTrace", "forward",
    "init_model", "loss_gradients", "train", "train_step",
    "Dataset", "DatasetSpec", "SplitDataset", "generate", "load_csv",
    "per_class_counts", "save_csv", "split",
    "__version__",
]
