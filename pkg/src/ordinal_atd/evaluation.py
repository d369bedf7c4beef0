"""Nearest-neighbour accuracy, K-NN classification error and category distance matrices.

Neighbours are ranked by cosine similarity, highest first; equal similarities
are ordered by ascending sample index so every result is deterministic.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .geometry import NORM_FLOOR, DegenerateVectorError


class InsufficientSamplesError(ValueError):
    def __init__(self, message: str, rank: int | None = None):
        super().__init__(message)
        self.rank = rank


class UndefinedCorrelationError(ValueError):
    pass


def _unit_rows(emb) -> np.ndarray:
    e = np.asarray(emb, dtype=np.float64)
    if e.ndim != 2:
        raise ValueError(f"embeddings must be an (n, d) array, got shape {e.shape}")
    norms = np.sqrt(np.einsum("ij,ij->i", e, e))
    if np.any(norms < NORM_FLOOR):
        raise DegenerateVectorError("embedding set contains a zero-norm vector")
    return e / norms[:, None]


def cosine_similarity_matrix(a, b=None) -> np.ndarray:
    """Cosine similarities between rows of ``a`` and rows of ``b`` (default ``a``)."""
    ua = _unit_rows(a)
    ub = ua if b is None else _unit_rows(b)
    return np.clip(ua @ ub.T, -1.0, 1.0)


def _top_k(sim: np.ndarray, k: int) -> np.ndarray:
    # stable sort on -sim keeps ascending index order among ties
    order = np.argsort(-sim, axis=1, kind="stable")
    return order[:, :k]


def nearest_neighbors(embeddings, k: int) -> np.ndarray:
    """Leave-one-out neighbour indices, shape ``(N, k)``; a query never lists itself."""
    sim = cosine_similarity_matrix(embeddings)
    n = sim.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= K < N, got K={k}, N={n}")
    np.fill_diagonal(sim, -np.inf)
    return _top_k(sim, k)


def knn_accuracy(embeddings, labels, k: int) -> float:
    """Fraction of same-label entries among every sample's K nearest other samples."""
    labels = np.asarray(labels)
    if len(labels) != len(embeddings):
        raise ValueError("embeddings and labels differ in length")
    nbrs = nearest_neighbors(embeddings, k)
    hits = labels[nbrs] == labels[:, None]
    return float(hits.sum()) / (len(labels) * k)


def knn_predict(train_emb, train_labels, query_emb, k: int) -> np.ndarray:
    """Majority vote of the K most similar training points; vote ties go to the lowest rank."""
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if len(train_labels) == 0 or len(query_emb) == 0:
        raise ValueError("train and query sets must be non-empty")
    if len(train_labels) != len(train_emb):
        raise ValueError("train embeddings and labels differ in length")
    if not 1 <= k <= len(train_labels):
        raise ValueError(f"need 1 <= K <= |train|, got K={k}, |train|={len(train_labels)}")
    nbrs = _top_k(cosine_similarity_matrix(query_emb, train_emb), k)
    votes = train_labels[nbrs]
    n_labels = int(train_labels.max()) + 1
    counts = np.zeros((len(votes), n_labels), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(len(votes)), k), votes.ravel()), 1)
    return np.argmax(counts, axis=1)  # argmax returns the first (lowest) label on ties


def knn_classify_error(train_emb, train_labels, test_emb, test_labels, k: int) -> float:
    """Misclassification rate of K-NN (cosine similarity) trained on one split, tested on another."""
    test_labels = np.asarray(test_labels)
    if len(test_labels) == 0 or len(train_labels) == 0:
        raise ValueError("train and test splits must be non-empty")
    if len(test_labels) != len(test_emb):
        raise ValueError("test embeddings and labels differ in length")
    pred = knn_predict(train_emb, train_labels, test_emb, k)
    return float(np.mean(pred != test_labels))


@dataclass
class CategoryDistanceMatrix:
    """Mean cosine distance between the latents of every pair of categories.

    With ``rescaled`` the distance is ``(1 - cos) / 2`` (range [0, 1]);
    otherwise ``1 - cos`` (range [0, 2]).
    """

    values: np.ndarray
    rescaled: bool = True

    @property
    def n_categories(self) -> int:
        return self.values.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        ranks = list(range(self.n_categories))
        w.writerow(["rank", *ranks])
        for r in ranks:
            w.writerow([r, *(repr(float(x)) for x in self.values[r])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, rescaled: bool = True) -> "CategoryDistanceMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        values = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
        return cls(values, rescaled)


def category_distance_matrix(embeddings, labels, n_categories: int | None = None,
                             rescaled: bool = True) -> CategoryDistanceMatrix:
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(embeddings):
        raise ValueError("embeddings and labels differ in length")
    c = int(labels.max()) + 1 if n_categories is None else n_categories
    members = [np.flatnonzero(labels == r) for r in range(c)]
    for r, idx in enumerate(members):
        if len(idx) < 2:
            raise InsufficientSamplesError(
                f"category {r} has {len(idx)} sample(s); at least 2 are needed", rank=r
            )

    unit = _unit_rows(embeddings)
    values = np.zeros((c, c))
    for r in range(c):
        for s in range(r, c):
            sim = np.clip(unit[members[r]] @ unit[members[s]].T, -1.0, 1.0)
            dist = 1.0 - sim
            if rescaled:
                dist = dist / 2.0
            if r == s:
                n = len(members[r])
                iu = np.triu_indices(n, k=1)
                values[r, r] = dist[iu].mean()
            else:
                values[r, s] = values[s, r] = dist.mean()
    return CategoryDistanceMatrix(values, rescaled)


def ordinal_monotonicity_score(matrix) -> float:
    """Spearman correlation between rank gap ``|r - c|`` and distance, strict upper triangle."""
    m = matrix.values if isinstance(matrix, CategoryDistanceMatrix) else np.asarray(matrix, float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    c = m.shape[0]
    if c < 3:
        raise ValueError("need at least 3 categories")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    r, s = np.triu_indices(c, k=1)
    vals = m[r, s]
    if np.all(vals == vals[0]):
        raise UndefinedCorrelationError("distances are constant; rank correlation is undefined")
    rho = stats.spearmanr(s - r, vals).statistic
    return float(rho)
