"""End-to-end runs: split, train, then score the held-out test split.

The UCI settings below were tuned once on Car, Balance and Hayes-Roth and are
shared by all tabular datasets.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataio import OrdinalDataset, builtin_schema, drop_categories, load_csv_ordinal, split
from .evaluation import (
    CategoryDistanceMatrix,
    category_distance_matrix,
    knn_accuracy,
    knn_classify_error,
    ordinal_monotonicity_score,
)
from .network import NetworkParameters
from .trainer import TrainConfig, TrainHistory, embed, train

UCI_CONFIG = TrainConfig(epochs=300, batch_size=64, learning_rate=3e-3)
DATA_ENV = "ATD_DATA_DIR"
MIN_STRATIFIED = 3  # one row each for train, validation and test


def uci_path(name: str, data_dir=None) -> Path:
    """``<data_dir>/<name>.data``; the directory defaults to ``$ATD_DATA_DIR`` or ``./data/uci``."""
    base = data_dir or os.environ.get(DATA_ENV) or Path("data") / "uci"
    return Path(base) / f"{name}.data"


def load_uci(name: str, data_dir=None) -> tuple[OrdinalDataset, list[str]]:
    """Load a UCI file with its built-in schema, dropping classes too small to stratify.

    Returns the dataset and the names of dropped classes.
    """
    ds = load_csv_ordinal(uci_path(name, data_dir), builtin_schema(name))
    sparse = [r for r, n in enumerate(ds.category_counts()) if n < MIN_STRATIFIED]
    dropped = [ds.class_names[r] for r in sparse]
    return (drop_categories(ds, sparse) if sparse else ds), dropped


@dataclass
class RunResult:
    seed: int
    params: NetworkParameters
    history: TrainHistory
    test_error: float
    test_accuracy: float  # leave-one-out K-NN accuracy within the test split
    matrix: CategoryDistanceMatrix
    monotonicity: float
    seconds: float


def evaluate_split(params: NetworkParameters, train_set: OrdinalDataset, test_set: OrdinalDataset,
                   k: int = 3) -> tuple[float, float, CategoryDistanceMatrix]:
    """K-NN error (train gallery, test queries), test leave-one-out accuracy and test matrix."""
    z_train = embed(params, train_set.features)
    z_test = embed(params, test_set.features)
    err = knn_classify_error(z_train, train_set.labels, z_test, test_set.labels, k)
    acc = knn_accuracy(z_test, test_set.labels, k)
    matrix = category_distance_matrix(z_test, test_set.labels, test_set.n_categories)
    return err, acc, matrix


def run_experiment(dataset: OrdinalDataset, config: TrainConfig, test_fraction: float = 0.2,
                   val_fraction_of_train: float = 0.2, sink=None) -> RunResult:
    """Split with ``config.seed``, train, and evaluate on the test split."""
    start = time.perf_counter()
    tr, va, te = split(dataset, test_fraction, val_fraction_of_train, seed=config.seed)
    params, history = train(tr, va, config, sink=sink)
    err, acc, matrix = evaluate_split(params, tr, te, config.k)
    return RunResult(
        seed=config.seed,
        params=params,
        history=history,
        test_error=err,
        test_accuracy=acc,
        matrix=matrix,
        monotonicity=ordinal_monotonicity_score(matrix),
        seconds=time.perf_counter() - start,
    )


def run_seeds(dataset: OrdinalDataset, config: TrainConfig, seeds) -> list[RunResult]:
    return [run_experiment(dataset, replace(config, seed=int(s))) for s in seeds]


def mean_error(results: list[RunResult]) -> tuple[float, float]:
    errs = np.array([r.test_error for r in results])
    return float(errs.mean()), float(errs.std(ddof=1)) if len(errs) > 1 else 0.0
