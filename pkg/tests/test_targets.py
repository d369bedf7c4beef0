from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordinal_atd.dataio import OrdinalDataset
from ordinal_atd.targets import (
    MissingCategoryError,
    UnsupportedCategoryCountError,
    sample_triplet_batch,
    target_distance,
    target_fraction,
    triplet_templates,
)


def enumerate_templates(c):
    """Independent enumeration: every rank triple that is inner or anchored on both bounds."""
    found = set()
    for i in range(c):
        for j in range(c):
            for k in range(c):
                inner = i == j == k
                boundary = i == 0 and 1 <= j <= c - 1 and k == (0 if j == c - 1 else c - 1)
                if inner or boundary:
                    found.add(((i, j, k), (Fraction(abs(i - j), c - 1), Fraction(abs(j - k), c - 1))))
    return found


class TestTargetDistance:
    def test_quarter_turn(self):
        assert target_distance(0, 2, 5) == 0.5

    def test_half_turn(self):
        assert target_distance(0, 4, 5) == 1.0

    @pytest.mark.parametrize("c", [3, 4, 7])
    def test_same_rank(self, c):
        for r in range(c):
            assert target_distance(r, r, c) == 0.0

    def test_exact_fraction(self):
        assert target_fraction(1, 3, 7) == Fraction(1, 3)

    def test_binary_rejected(self):
        with pytest.raises(UnsupportedCategoryCountError):
            target_distance(0, 1, 2)

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError):
            target_distance(0, 5, 5)


class TestTemplates:
    def test_five_categories(self):
        templates = triplet_templates(5)
        assert len(templates) == 9
        by_ranks = {t.ranks: t.targets for t in templates}
        assert by_ranks[(0, 1, 4)] == (0.25, 0.75)
        assert by_ranks[(0, 2, 4)] == (0.5, 0.5)
        assert by_ranks[(0, 4, 0)] == (1.0, 1.0)

    def test_three_categories_boundary_set(self):
        boundary = {(t.ranks, t.targets) for t in triplet_templates(3) if not t.is_inner}
        assert boundary == {((0, 1, 2), (0.5, 0.5)), ((0, 2, 0), (1.0, 1.0))}

    @pytest.mark.parametrize("c", range(3, 21))
    def test_count_and_enumeration_oracle(self, c):
        templates = triplet_templates(c)
        assert len(templates) == 2 * c - 1
        assert {(t.ranks, t.exact_targets) for t in templates} == enumerate_templates(c)

    @pytest.mark.parametrize("c", range(3, 11))
    def test_inner_targets_zero(self, c):
        inner = [t for t in triplet_templates(c) if t.is_inner]
        assert len(inner) == c
        assert all(t.exact_targets == (0, 0) for t in inner)

    @pytest.mark.parametrize("c", range(3, 11))
    def test_targets_recompute(self, c):
        for t in triplet_templates(c):
            i, j, k = t.ranks
            assert t.targets == (target_distance(i, j, c), target_distance(j, k, c))

    @pytest.mark.parametrize("c", range(3, 11))
    def test_reversal_swaps_targets(self, c):
        for r in range(1, c - 1):
            t = next(t for t in triplet_templates(c) if t.ranks == (0, r, c - 1))
            rev = t.reversed()
            assert rev.ranks == (c - 1, r, 0)
            assert rev.exact_targets == (Fraction(c - 1 - r, c - 1), Fraction(r, c - 1))

    def test_too_few_categories(self):
        with pytest.raises(UnsupportedCategoryCountError):
            triplet_templates(2)


def one_per_class(c=3, dim=2):
    return OrdinalDataset(np.eye(c, dim) + 0.1, np.arange(c), c)


class TestSampling:
    def test_zero_batch(self, rng):
        with pytest.raises(ValueError):
            sample_triplet_batch(one_per_class(), triplet_templates(3), 0, rng)

    def test_single_sample_classes(self, rng):
        batch = sample_triplet_batch(one_per_class(), triplet_templates(3), 10, rng)
        assert len(batch) == 10
        allowed = {(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)}
        assert {tuple(t) for t in batch.targets} <= allowed

    def test_seeded_batches_identical(self):
        ds = OrdinalDataset(np.random.default_rng(0).random((40, 3)), np.arange(40) % 4, 4)
        a = sample_triplet_batch(ds, triplet_templates(4), 32, np.random.default_rng(5))
        b = sample_triplet_batch(ds, triplet_templates(4), 32, np.random.default_rng(5))
        for name in ("x_i", "x_j", "x_k", "targets", "template_ids"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_rows_come_from_template_categories(self, rng):
        ds = OrdinalDataset(np.random.default_rng(1).random((50, 2)), np.arange(50) % 5, 5)
        templates = triplet_templates(5)
        batch = sample_triplet_batch(ds, templates, 200, rng)
        lookup = {tuple(x): y for x, y in zip(ds.features, ds.labels)}
        for n, tid in enumerate(batch.template_ids):
            ranks = tuple(lookup[tuple(x[n])] for x in (batch.x_i, batch.x_j, batch.x_k))
            assert ranks == templates[tid].ranks
            assert tuple(batch.targets[n]) == templates[tid].targets

    def test_missing_category(self, rng):
        ds = OrdinalDataset(np.random.default_rng(1).random((6, 2)), [0, 0, 1, 1, 3, 3], 4)
        with pytest.raises(MissingCategoryError) as info:
            sample_triplet_batch(ds, triplet_templates(4), 8, rng)
        assert info.value.rank == 2

    def test_template_choice_roughly_uniform(self):
        ds = OrdinalDataset(np.random.default_rng(2).random((30, 2)), np.arange(30) % 3, 3)
        batch = sample_triplet_batch(ds, triplet_templates(3), 50_000, np.random.default_rng(3))
        freq = np.bincount(batch.template_ids, minlength=5) / 50_000
        assert np.all(np.abs(freq - 0.2) < 0.01)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 20))
def test_template_count_property(c):
    assert len(triplet_templates(c)) == 2 * c - 1
