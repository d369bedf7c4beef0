"""Ordinal triplet training: predicted angles, squared-error loss, and the epoch loop.

For a triplet ``(x_i, x_j, x_k)`` the shared network produces unit latents
``z_i, z_j, z_k``; the predicted distances are

    y_ij = arccos(clamp(cos(z_i, z_j))) / pi,   y_jk = arccos(clamp(cos(z_j, z_k))) / pi

and the batch loss is the mean over triplets of the two squared errors. The
clamp keeps the cosine inside ``[-1 + eps, 1 - eps]`` so the arccos
derivative stays finite when latents of one category coincide.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataio import OrdinalDataset
from .evaluation import knn_accuracy
from .geometry import rowwise_angular_distance
from .network import (
    DEFAULT_EMBEDDING_DIM,
    DEFAULT_HIDDEN,
    AdamState,
    DegenerateOutputError,
    NetworkParameters,
    adam_step,
    backward,
    forward,
    init_network,
)
from .targets import MissingCategoryError, TripletBatch, sample_triplet_batch, triplet_templates

UNIT_TOL = 1e-6


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    batches_per_epoch: int | None = None  # None: ceil(|train| / batch_size)
    learning_rate: float = 1e-4
    arccos_eps: float = 1e-7
    seed: int = 0
    k: int = 3
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    final_activation: str = "identity"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 0:
            raise ValueError("epochs cannot be negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.batches_per_epoch is not None and self.batches_per_epoch < 1:
            raise ValueError("batches_per_epoch must be positive")
        if not 0.0 < self.arccos_eps <= 1e-3:
            raise ValueError("arccos_eps must lie in (0, 1e-3]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if any(h < 1 for h in self.hidden) or self.embedding_dim < 2:
            raise ValueError("layer widths must be positive and the embedding at least 2-D")

    def steps_per_epoch(self, n_train: int) -> int:
        if self.batches_per_epoch is not None:
            return self.batches_per_epoch
        return max(1, math.ceil(n_train / self.batch_size))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_accuracy: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss", "val_accuracy", "selected"])
        for r in self.records:
            w.writerow([r.epoch, repr(r.loss), repr(r.val_accuracy), int(r.epoch == self.best_epoch)])
        return buf.getvalue()


def predict_distances(z_i, z_j, z_k) -> np.ndarray:
    """Unclamped predicted (y_ij, y_jk) per row, shape ``(T, 2)``."""
    z_i, z_j, z_k = (np.atleast_2d(np.asarray(z, dtype=np.float64)) for z in (z_i, z_j, z_k))
    return np.stack([rowwise_angular_distance(z_i, z_j), rowwise_angular_distance(z_j, z_k)], axis=1)


def compute_loss(predicted, targets) -> float:
    """Mean over triplets of ``(y_ij - yhat_ij)^2 + (y_jk - yhat_jk)^2``."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.size == 0 or t.size == 0:
        raise ValueError("need at least one prediction")
    if p.shape != t.shape or p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"predictions {p.shape} and targets {t.shape} must both be (T, 2)")
    return float(np.sum((t - p) ** 2) / len(p))


def _pair_terms(a: np.ndarray, b: np.ndarray, eps: float):
    """Clamped distance and the gradients of the distance w.r.t. ``a`` and ``b``."""
    na = np.sqrt(np.einsum("ij,ij->i", a, a))
    nb = np.sqrt(np.einsum("ij,ij->i", b, b))
    ua, ub = a / na[:, None], b / nb[:, None]
    u = np.einsum("ij,ij->i", ua, ub)
    uc = np.clip(u, -1.0 + eps, 1.0 - eps)
    dist = np.arccos(uc) / np.pi
    inside = (u > -1.0 + eps) & (u < 1.0 - eps)
    dd_du = np.where(inside, -1.0 / (np.pi * np.sqrt(1.0 - uc * uc)), 0.0)
    du_da = (ub - u[:, None] * ua) / na[:, None]
    du_db = (ua - u[:, None] * ub) / nb[:, None]
    return dist, dd_du[:, None] * du_da, dd_du[:, None] * du_db


def triplet_loss_and_grads(z_i, z_j, z_k, targets, eps: float = 1e-7):
    """Mean batch loss and its gradients w.r.t. each latent row.

    ``z_j`` collects contributions from both distance terms.
    """
    t = np.asarray(targets, dtype=np.float64)
    d_ij, g_i_ij, g_j_ij = _pair_terms(z_i, z_j, eps)
    d_jk, g_j_jk, g_k_jk = _pair_terms(z_j, z_k, eps)
    n = len(t)
    r_ij = d_ij - t[:, 0]
    r_jk = d_jk - t[:, 1]
    loss = float(np.sum(r_ij**2 + r_jk**2) / n)
    c_ij = (2.0 * r_ij / n)[:, None]
    c_jk = (2.0 * r_jk / n)[:, None]
    return loss, c_ij * g_i_ij, c_ij * g_j_ij + c_jk * g_j_jk, c_jk * g_k_jk


def loss_gradient_wrt_embeddings(z_i, z_j, z_k, targets, eps: float = 1e-7):
    """Gradient of one triplet's loss w.r.t. its three unit latents.

    Raises:
        ValueError: a latent is not unit length (tolerance 1e-6).
    """
    zs = [np.asarray(z, dtype=np.float64) for z in (z_i, z_j, z_k)]
    for name, z in zip(("z_i", "z_j", "z_k"), zs):
        if z.ndim != 1:
            raise ValueError(f"{name} must be a single vector")
        if abs(np.linalg.norm(z) - 1.0) > UNIT_TOL:
            raise ValueError(f"{name} is not unit length (norm {np.linalg.norm(z):.9g})")
    _, gi, gj, gk = triplet_loss_and_grads(*(z[None, :] for z in zs), np.atleast_2d(targets), eps)
    return gi[0], gj[0], gk[0]


def batch_loss_and_gradients(
    params: NetworkParameters, batch: TripletBatch, eps: float = 1e-7
) -> tuple[float, list[np.ndarray]]:
    """Forward all three towers as one stacked batch, then backpropagate the loss."""
    n = len(batch)
    x = np.concatenate([batch.x_i, batch.x_j, batch.x_k])
    z, trace = forward(params, x)
    loss, gi, gj, gk = triplet_loss_and_grads(z[:n], z[n:2 * n], z[2 * n:], batch.targets, eps)
    grads = backward(params, trace, np.concatenate([gi, gj, gk]))
    return loss, grads


def batch_loss(params: NetworkParameters, batch: TripletBatch, eps: float = 1e-7) -> float:
    n = len(batch)
    z, _ = forward(params, np.concatenate([batch.x_i, batch.x_j, batch.x_k]))
    loss, *_ = triplet_loss_and_grads(z[:n], z[n:2 * n], z[2 * n:], batch.targets, eps)
    return loss


def embed(params: NetworkParameters, features) -> np.ndarray:
    z, _ = forward(params, np.atleast_2d(np.asarray(features, dtype=np.float64)))
    return z


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int, batch: int | None = None):
        where = f"epoch {epoch}" + (f", batch {batch}" if batch is not None else "")
        super().__init__(f"{where}: {message}")
        self.epoch = epoch
        self.batch = batch


def _check_sets(train_set: OrdinalDataset, val_set: OrdinalDataset) -> None:
    if train_set.dim != val_set.dim:
        raise ValueError(f"feature width differs: train {train_set.dim}, val {val_set.dim}")
    if train_set.n_categories != val_set.n_categories:
        raise ValueError("train and validation sets disagree on the category count")
    counts = train_set.category_counts()
    for r, c in enumerate(counts):
        if c == 0:
            raise MissingCategoryError(r)


def train(
    train_set: OrdinalDataset,
    val_set: OrdinalDataset,
    config: TrainConfig,
    sink: Callable[[EpochRecord], None] | None = None,
    init_params: NetworkParameters | None = None,
) -> tuple[NetworkParameters, TrainHistory]:
    """Run the full epoch loop and return the parameters of the best validation epoch.

    The validation score is leave-one-out K-NN accuracy of the validation
    latents; ties keep the earliest epoch. With ``epochs == 0`` nothing is
    trained and the initial parameters come back unchanged.
    """
    _check_sets(train_set, val_set)
    rng = np.random.default_rng(config.seed)
    if init_params is None:
        params = init_network(
            train_set.dim,
            rng,
            hidden=config.hidden,
            embedding_dim=config.embedding_dim,
            final_activation=config.final_activation,
        )
    else:
        params = init_params
    templates = triplet_templates(train_set.n_categories)
    state = AdamState.zeros_like(params, learning_rate=config.learning_rate)
    steps = config.steps_per_epoch(len(train_set))

    history = TrainHistory()
    best = params
    best_acc = -math.inf
    for epoch in range(config.epochs):
        total = 0.0
        for b in range(steps):
            batch = sample_triplet_batch(train_set, templates, config.batch_size, rng)
            try:
                loss, grads = batch_loss_and_gradients(params, batch, config.arccos_eps)
            except DegenerateOutputError as err:
                raise TrainingError(str(err), epoch, b) from err
            params, state = adam_step(params, grads, state)
            total += loss
        try:
            acc = knn_accuracy(embed(params, val_set.features), val_set.labels, config.k)
        except DegenerateOutputError as err:
            raise TrainingError(f"validation: {err}", epoch) from err
        record = EpochRecord(epoch, total / steps, acc)
        history.records.append(record)
        if acc > best_acc:
            best_acc = acc
            best = params
            history.best_epoch = epoch
        if sink is not None:
            sink(record)
    return best, history


def frozen_batch_losses(params: NetworkParameters, batch: TripletBatch, steps: int,
                        learning_rate: float = 1e-3, eps: float = 1e-7) -> Sequence[float]:
    """Loss before each of ``steps`` Adam updates on one fixed batch (diagnostic helper)."""
    state = AdamState.zeros_like(params, learning_rate=learning_rate)
    out = []
    for _ in range(steps):
        loss, grads = batch_loss_and_gradients(params, batch, eps)
        out.append(loss)
        params, state = adam_step(params, grads, state)
    out.append(batch_loss(params, batch, eps))
    return out
