"""Ordinal metric learning with the angular triangle distance."""

from .dataio import (
    DatasetSchema,
    OrdinalDataset,
    builtin_schema,
    load_csv_ordinal,
    make_synthetic_ordinal,
    split,
)
from .evaluation import (
    CategoryDistanceMatrix,
    category_distance_matrix,
    knn_accuracy,
    knn_classify_error,
    ordinal_monotonicity_score,
)
from .geometry import (
    angular_distance,
    angular_triangle_distance,
    check_metric_axioms,
    cosine_similarity,
)
from .experiment import UCI_CONFIG, load_uci, run_experiment
from .network import NetworkParameters, backward, forward, init_network
from .persistence import ModelArtifact, load_model, save_model
from .targets import TripletTemplate, target_distance, triplet_templates
from .trainer import TrainConfig, TrainHistory, compute_loss, embed, train

__version__ = "0.1.0"
