"""Ordinal target angles, the 2C-1 triplet templates, and triplet batch sampling.

Categories ``0 .. C-1`` are spread evenly over a half turn, so two categories
``r`` and ``s`` are expected to sit ``|r - s| / (C - 1)`` apart in normalized
angle. Training triplets come in two flavours:

* inner templates ``(r, r, r)`` with targets ``(0, 0)``, one per category;
* boundary templates anchored on the lowest and highest category,
  ``(0, r, C-1)`` for every middle rank, plus the full turn ``(0, C-1, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .dataio import OrdinalDataset

MIN_CATEGORIES = 3


class UnsupportedCategoryCountError(ValueError):
    """Raised for fewer than three ordinal categories."""


class MissingCategoryError(ValueError):
    """Raised when a template needs a category with no samples."""

    def __init__(self, rank: int):
        super().__init__(f"category {rank} has no samples")
        self.rank = rank


def _check_count(n_categories: int) -> None:
    if n_categories < MIN_CATEGORIES:
        raise UnsupportedCategoryCountError(
            f"need at least {MIN_CATEGORIES} ordinal categories, got {n_categories}"
        )


def target_fraction(r_a: int, r_b: int, n_categories: int) -> Fraction:
    """Exact target distance ``|r_a - r_b| / (C - 1)``."""
    _check_count(n_categories)
    for r in (r_a, r_b):
        if not 0 <= r < n_categories:
            raise ValueError(f"rank {r} outside [0, {n_categories - 1}]")
    return Fraction(abs(r_a - r_b), n_categories - 1)


def target_distance(r_a: int, r_b: int, n_categories: int) -> float:
    return float(target_fraction(r_a, r_b, n_categories))


@dataclass(frozen=True)
class TripletTemplate:
    ranks: tuple[int, int, int]
    exact_targets: tuple[Fraction, Fraction]

    @property
    def targets(self) -> tuple[float, float]:
        return (float(self.exact_targets[0]), float(self.exact_targets[1]))

    @property
    def is_inner(self) -> bool:
        return self.ranks[0] == self.ranks[1] == self.ranks[2]

    def reversed(self) -> "TripletTemplate":
        ri, rj, rk = self.ranks
        return TripletTemplate((rk, rj, ri), (self.exact_targets[1], self.exact_targets[0]))


def _template(ranks: tuple[int, int, int], n_categories: int) -> TripletTemplate:
    ri, rj, rk = ranks
    return TripletTemplate(
        ranks,
        (target_fraction(ri, rj, n_categories), target_fraction(rj, rk, n_categories)),
    )


def triplet_templates(n_categories: int) -> list[TripletTemplate]:
    """All 2C-1 templates: C inner, C-2 middle-rank boundary, one full turn."""
    _check_count(n_categories)
    top = n_categories - 1
    out = [_template((r, r, r), n_categories) for r in range(n_categories)]
    out += [_template((0, r, top), n_categories) for r in range(1, top)]
    out.append(_template((0, top, 0), n_categories))
    return out


@dataclass
class TripletBatch:
    """Aligned triplet inputs with their two target distances per row."""

    x_i: np.ndarray
    x_j: np.ndarray
    x_k: np.ndarray
    targets: np.ndarray  # (T, 2): (y_ij, y_jk)
    template_ids: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.targets)
        if n == 0:
            raise ValueError("a triplet batch cannot be empty")
        if not (len(self.x_i) == len(self.x_j) == len(self.x_k) == n):
            raise ValueError("triplet inputs and targets must have the same length")

    def __len__(self) -> int:
        return len(self.targets)


def category_members(labels: np.ndarray, n_categories: int) -> list[np.ndarray]:
    labels = np.asarray(labels)
    return [np.flatnonzero(labels == r) for r in range(n_categories)]


def sample_triplet_batch(
    dataset: "OrdinalDataset",
    templates: Sequence[TripletTemplate],
    batch_size: int,
    rng: np.random.Generator,
) -> TripletBatch:
    """Draw ``batch_size`` triplets.

    Each row picks a template uniformly, then an instance uniformly (with
    replacement) from each of the template's three categories.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    if not templates:
        raise ValueError("need at least one template")
    members = category_members(dataset.labels, dataset.n_categories)
    for t in templates:
        for r in t.ranks:
            if r >= len(members) or len(members[r]) == 0:
                raise MissingCategoryError(r)

    ranks = np.array([t.ranks for t in templates], dtype=np.int64)
    targets = np.array([t.targets for t in templates], dtype=np.float64)
    choice = rng.integers(0, len(templates), size=batch_size)
    draws = rng.random((batch_size, 3))

    picked = np.empty((batch_size, 3), dtype=np.int64)
    row_ranks = ranks[choice]
    for slot in range(3):
        for r in np.unique(row_ranks[:, slot]):
            rows = np.flatnonzero(row_ranks[:, slot] == r)
            pool = members[r]
            pos = np.minimum((draws[rows, slot] * len(pool)).astype(np.int64), len(pool) - 1)
            picked[rows, slot] = pool[pos]

    x = dataset.features
    return TripletBatch(
        x_i=x[picked[:, 0]],
        x_j=x[picked[:, 1]],
        x_k=x[picked[:, 2]],
        targets=targets[choice],
        template_ids=choice,
    )
