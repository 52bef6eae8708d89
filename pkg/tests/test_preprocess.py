"""Tests for the quantile transform, the encoder and CSV ingestion."""

import numpy as np
import pandas as pd
import pytest

from tabsynth.errors import DataError, StateError
from tabsynth.models import Split, TaskKind
from tabsynth.schemas import DatasetMeta
from tabsynth.services.preprocess import (
    TabularDataset,
    TabularEncoder,
    assign_split,
    fit_quantile,
    inverse_quantile,
    load_csv,
)
from tests.conftest import MIXTURE_META, mixture_frame, write_dataset


def small_dataset() -> TabularDataset:
    """N_num = 2, categoricals with 2 and 3 categories."""
    rng = np.random.default_rng(0)
    n = 40
    return TabularDataset(
        numerical=rng.standard_normal((n, 2)),
        numerical_names=["u", "v"],
        categorical=np.column_stack([rng.integers(0, 2, n), rng.integers(0, 3, n)]),
        categorical_names=["c1", "c2"],
        vocabularies=[["a", "b"], ["x", "y", "z"]],
        target=rng.integers(0, 2, n),
        target_name="t",
        task=TaskKind.BINCLASS,
        split=np.full(n, Split.TRAIN.value, dtype=object),
        target_vocabulary=["n", "y"],
    )


class TestQuantileTransform:
    def test_median_maps_to_zero(self):
        qt = fit_quantile([1, 2, 3, 4, 5])
        assert qt.transform(3.0) == pytest.approx(0.0, abs=1e-12)

    def test_constant_column(self):
        qt = fit_quantile([4.0] * 10)
        assert np.all(qt.transform([1.0, 4.0, 9.0]) == 0.0)
        assert np.all(inverse_quantile(qt, [-3.0, 0.0, 2.0]) == 4.0)

    def test_monotone(self):
        rng = np.random.default_rng(0)
        qt = fit_quantile(rng.exponential(size=300))
        grid = np.linspace(-1, 8, 500)
        assert np.all(np.diff(qt.transform(grid)) >= 0)

    def test_round_trip_on_training_values(self):
        values = np.random.default_rng(1).gamma(2.0, size=2500)
        qt = fit_quantile(values)
        back = qt.inverse(qt.transform(values))
        assert np.max(np.abs(back - values)) < 1e-6 * np.ptp(values)

    def test_inverse_clamps(self):
        qt = fit_quantile([1, 2, 3, 4, 5])
        assert inverse_quantile(qt, 10.0) == 5.0
        assert inverse_quantile(qt, -10.0) == 1.0
        assert inverse_quantile(qt, 0.0) == pytest.approx(3.0)

    def test_approximately_standard_normal(self):
        values = np.random.default_rng(2).lognormal(size=2000)
        z = fit_quantile(values).transform(values)
        assert abs(z.mean()) < 0.05
        assert abs(z.std() - 1.0) < 0.1

    def test_landmark_cap(self):
        assert fit_quantile(np.arange(5000.0)).quantiles.size == 1000

    def test_empty(self):
        with pytest.raises(ValueError):
            fit_quantile([])


class TestEncoder:
    def setup_method(self):
        self.dataset = small_dataset()
        self.encoder = TabularEncoder().fit(self.dataset)

    def test_width(self):
        assert self.encoder.width == 7

    def test_onehot_slices(self):
        x = self.encoder.encode(self.dataset).x
        for spec in self.encoder.specs:
            assert np.all(x[:, spec.index_range].sum(axis=1) == 1.0)

    def test_encode_row_slice(self):
        row = self.encoder.encode_row([0.1, 0.2], [0, 1], 1)
        assert row[4:7].tolist() == [0.0, 1.0, 0.0]

    def test_round_trip(self):
        batch = self.encoder.encode(self.dataset)
        decoded = self.encoder.decode(batch.x, batch.y)
        span = np.ptp(self.dataset.numerical, axis=0)
        assert np.all(np.abs(decoded.numerical - self.dataset.numerical) < 1e-6 * span)
        assert np.array_equal(decoded.categorical, self.dataset.categorical)
        assert np.array_equal(decoded.target, self.dataset.target)

    def test_row_round_trip(self):
        row = self.encoder.encode_row(self.dataset.numerical[3], self.dataset.categorical[3], 0)
        numerical, categorical, _ = self.encoder.decode_row(row, 0)
        np.testing.assert_allclose(numerical, self.dataset.numerical[3], atol=1e-6)
        assert categorical.tolist() == self.dataset.categorical[3].tolist()

    def test_unknown_category(self):
        with pytest.raises(DataError):
            self.encoder.encode_row([0.0, 0.0], [0, 5], 0)

    def test_unfitted(self):
        with pytest.raises(StateError):
            TabularEncoder().decode(np.zeros((1, 3)))

    def test_state_round_trip(self):
        restored = TabularEncoder.from_state(self.encoder.to_state())
        assert np.array_equal(restored.encode(self.dataset).x, self.encoder.encode(self.dataset).x)
        assert restored.class_counts == self.encoder.class_counts

    def test_fitted_on_train_split_only(self):
        data = small_dataset()
        data.split[:20] = Split.TEST.value
        data.numerical[:20] += 1000.0
        encoder = TabularEncoder().fit(data)
        assert encoder.transforms[0].quantiles[-1] < 100.0
        assert encoder.train_size == 20


class TestRegressionTarget:
    def test_target_joins_numeric_block(self, regression):
        encoder = TabularEncoder().fit(regression)
        assert encoder.num_numerical == 3
        assert encoder.num_classes == 0
        batch = encoder.encode(regression.split_view(Split.TRAIN))
        assert batch.y is None
        decoded = encoder.decode(batch.x)
        train = regression.split_view(Split.TRAIN)
        np.testing.assert_allclose(decoded.target, train.target, atol=1e-6 * np.ptp(train.target))

    def test_learner_features_exclude_target(self, regression):
        encoder = TabularEncoder().fit(regression)
        assert encoder.learner_features(regression).shape[1] == 2 + 2


class TestAssignSplit:
    def test_proportions_and_determinism(self):
        split = assign_split(1000, seed=3)
        counts = pd.Series(split).value_counts()
        assert counts["train"] == 800 and counts["validation"] == 100 and counts["test"] == 100
        assert np.array_equal(split, assign_split(1000, seed=3))


class TestLoadCsv:
    def setup_method(self):
        self.meta = DatasetMeta.model_validate(MIXTURE_META)

    def test_loads_typed_dataset(self, tmp_path):
        csv_path, _ = write_dataset(tmp_path, mixture_frame(50), MIXTURE_META)
        data = load_csv(csv_path, self.meta)
        assert len(data) == 50
        assert data.vocabularies == [["blue", "green", "red"]]
        assert data.target_vocabulary == ["no", "yes"]
        assert data.header == ["x", "color", "label"]
        assert data.to_frame().columns.tolist() == ["x", "color", "label"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            load_csv(tmp_path / "absent.csv", self.meta)

    def test_missing_value_reports_line(self, tmp_path):
        frame = mixture_frame(10)
        frame.loc[3, "x"] = None
        csv_path, _ = write_dataset(tmp_path, frame, MIXTURE_META)
        with pytest.raises(DataError, match="line 5"):
            load_csv(csv_path, self.meta)

    def test_type_mismatch_reports_column(self, tmp_path):
        frame = mixture_frame(10).astype({"x": object})
        frame.loc[2, "x"] = "abc"
        csv_path, _ = write_dataset(tmp_path, frame, MIXTURE_META)
        with pytest.raises(DataError, match="line 4, column 'x'"):
            load_csv(csv_path, self.meta)

    def test_undeclared_column(self, tmp_path):
        frame = mixture_frame(10).assign(extra=1)
        csv_path, _ = write_dataset(tmp_path, frame, MIXTURE_META)
        with pytest.raises(DataError, match="not declared"):
            load_csv(csv_path, self.meta)

    def test_missing_column(self, tmp_path):
        csv_path, _ = write_dataset(tmp_path, mixture_frame(10).drop(columns="color"), MIXTURE_META)
        with pytest.raises(DataError, match="missing columns"):
            load_csv(csv_path, self.meta)

    def test_split_column(self, tmp_path):
        frame = mixture_frame(10).assign(part=["train"] * 8 + ["test"] * 2)
        meta = {**MIXTURE_META, "split_column": "part"}
        csv_path, _ = write_dataset(tmp_path, frame, meta)
        data = load_csv(csv_path, DatasetMeta.model_validate(meta))
        assert (data.split == "test").sum() == 2
        assert data.to_frame().columns.tolist() == ["x", "color", "label", "part"]

    def test_invalid_split_tag(self, tmp_path):
        frame = mixture_frame(4).assign(part=["train", "train", "dev", "test"])
        meta = {**MIXTURE_META, "split_column": "part"}
        csv_path, _ = write_dataset(tmp_path, frame, meta)
        with pytest.raises(DataError, match="invalid split tag"):
            load_csv(csv_path, DatasetMeta.model_validate(meta))

    def test_unknown_category_against_reference(self, tmp_path):
        reference = load_csv(write_dataset(tmp_path, mixture_frame(50), MIXTURE_META, "real")[0], self.meta)
        other = mixture_frame(5)
        other.loc[0, "color"] = "purple"
        csv_path, _ = write_dataset(tmp_path, other, MIXTURE_META, "other")
        with pytest.raises(DataError, match="purple"):
            load_csv(csv_path, self.meta, reference=reference, force_split=Split.TRAIN)

    def test_single_class_target(self, tmp_path):
        frame = mixture_frame(10).assign(label="yes")
        csv_path, _ = write_dataset(tmp_path, frame, MIXTURE_META)
        with pytest.raises(DataError, match="fewer than two classes"):
            load_csv(csv_path, self.meta)
