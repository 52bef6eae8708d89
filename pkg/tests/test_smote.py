"""Tests for the SMOTE interpolation baseline."""

import numpy as np
import pandas as pd
import pytest

from tabsynth.config import settings
from tabsynth.errors import DataError
from tabsynth.models import Split
from tabsynth.schemas import SmoteConfig
from tabsynth.services.multinomial import onehot
from tabsynth.services.smote import draw, kth_nearest, smote_sample


class TestKthNearest:
    def test_ordering(self):
        points = np.array([0.0, 1.0, 10.0])
        assert kth_nearest(points, 0, 1) == 1
        assert kth_nearest(points, 0, 2) == 2

    def test_never_returns_query(self):
        points = np.random.default_rng(0).standard_normal((20, 3))
        for q in range(20):
            assert kth_nearest(points, q, 1) != q

    def test_duplicate_rows_are_neighbours(self):
        points = np.array([[1.0, 1.0], [5.0, 5.0], [1.0, 1.0]])
        assert kth_nearest(points, 0, 1) == 2

    def test_ties_pick_lower_index(self):
        points = np.array([0.0, -1.0, 1.0])
        assert kth_nearest(points, 0, 1) == 1
        assert kth_nearest(points, 0, 2) == 2

    @pytest.mark.parametrize("k", [0, 3])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValueError):
            kth_nearest(np.zeros((3, 1)), 0, k)


class TestDraw:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.numeric = rng.standard_normal((30, 2))
        self.onehots = onehot(rng.integers(0, 3, 30), 3)
        self.labels = rng.integers(0, 2, 30)

    def test_midpoint(self):
        numeric = np.array([[0.0, 0.0], [2.0, 2.0]])
        config = SmoteConfig(k_neighbours=1, lambda_range=(0.5, 0.5))
        result = draw(numeric, np.zeros((2, 0)), None, config, n=4)
        assert np.allclose(result.x, [[1.0, 1.0]] * 4)

    def test_on_segment(self):
        result = draw(self.numeric, self.onehots, None, SmoteConfig(k_neighbours=3), n=200)
        a, b = self.numeric[result.bases], self.numeric[result.neighbours]
        lam = result.lambdas[:, None]
        assert np.all((result.lambdas >= 0) & (result.lambdas <= 1))
        np.testing.assert_allclose(result.x[:, :2], (1 - lam) * a + lam * b, atol=1e-12)

    def test_neighbour_is_kth_nearest_in_class(self):
        config = SmoteConfig(k_neighbours=2)
        result = draw(self.numeric, self.onehots, self.labels, config, n=50)
        space = np.concatenate([self.numeric, self.onehots], axis=1)
        for base, nb in zip(result.bases, result.neighbours):
            members = np.flatnonzero(self.labels == self.labels[base])
            local = int(np.searchsorted(members, base))
            assert nb == members[kth_nearest(space[members], local, 2)]
        assert np.array_equal(result.labels, self.labels[result.bases])

    def test_categorical_switch(self):
        result = draw(self.numeric, self.onehots, None, SmoteConfig(k_neighbours=1), n=300)
        low = result.lambdas <= 0.5
        assert np.array_equal(result.x[low, 2:], self.onehots[result.bases[low]])
        assert np.array_equal(result.x[~low, 2:], self.onehots[result.neighbours[~low]])

    def test_too_few_rows_in_a_class(self):
        labels = np.array([0] * 29 + [1])
        with pytest.raises(DataError, match="too few"):
            draw(self.numeric, self.onehots, labels, SmoteConfig(k_neighbours=1), n=10)

    def test_deterministic_across_threads(self, monkeypatch):
        monkeypatch.setattr(settings, "sample_chunk_rows", 7)
        config = SmoteConfig(k_neighbours=2, seed=11)
        one = draw(self.numeric, self.onehots, self.labels, config, n=60, threads=1)
        many = draw(self.numeric, self.onehots, self.labels, config, n=60, threads=4)
        assert np.array_equal(one.x, many.x)
        assert np.array_equal(one.bases, many.bases)


class TestSmoteSample:
    def test_size_follows_proportion(self, mixture):
        train = mixture.split_view(Split.TRAIN)
        out = smote_sample(mixture, SmoteConfig(sample_proportion=0.5))
        assert len(out) == round(0.5 * len(train))
        assert out.header == mixture.header

    def test_zero_lambda_reproduces_training_rows(self, mixture):
        train = mixture.split_view(Split.TRAIN)
        out = smote_sample(mixture, SmoteConfig(lambda_range=(0.0, 0.0)))
        real = set(map(tuple, train.to_frame().itertuples(index=False)))
        synthetic = set(map(tuple, out.to_frame().itertuples(index=False)))
        assert synthetic <= real

    def test_unit_lambda_copies_neighbours_in_regression(self, regression):
        train = regression.split_view(Split.TRAIN)
        out = smote_sample(regression, SmoteConfig(lambda_range=(1.0, 1.0), k_neighbours=3))
        real = set(map(tuple, train.to_frame().itertuples(index=False)))
        assert set(map(tuple, out.to_frame().itertuples(index=False))) <= real

    def test_labels_preserved_per_class(self, mixture):
        out = smote_sample(mixture, SmoteConfig(seed=3))
        train = mixture.split_view(Split.TRAIN)
        # Bases are drawn uniformly, so class balance follows the training split.
        share = out.class_counts()[1] / len(out)
        assert abs(share - train.class_counts()[1] / len(train)) < 0.08

    def test_deterministic(self, mixture):
        a = smote_sample(mixture, SmoteConfig(seed=4), threads=1)
        b = smote_sample(mixture, SmoteConfig(seed=4), threads=3)
        pd.testing.assert_frame_equal(a.to_frame(), b.to_frame())

    def test_k_too_large(self, mixture):
        with pytest.raises(DataError):
            smote_sample(mixture, SmoteConfig(k_neighbours=10_000))
