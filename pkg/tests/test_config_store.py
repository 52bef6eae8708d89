"""Tests for metadata and run-config persistence."""

import json

import pytest
import yaml

from tabsynth import config_store
from tabsynth.config import Settings
from tabsynth.errors import ConfigError
from tabsynth.models import ColumnKind, LearnerKind, TaskKind
from tabsynth.schemas import CompareReport, CompareRow, RunConfig
from tests.conftest import MIXTURE_META


class TestLoadMeta:
    def test_valid(self, tmp_path):
        path = tmp_path / "data.meta.yaml"
        path.write_text(yaml.safe_dump(MIXTURE_META))
        meta = config_store.load_meta(path)
        assert meta.task is TaskKind.BINCLASS
        assert meta.target == "label"
        assert meta.names(ColumnKind.NUMERICAL) == ["x"]

    def test_two_targets(self, tmp_path):
        path = tmp_path / "bad.yaml"
        columns = MIXTURE_META["columns"] + [{"name": "other", "kind": "target"}]
        path.write_text(yaml.safe_dump({**MIXTURE_META, "columns": columns}))
        with pytest.raises(ConfigError, match="target"):
            config_store.load_meta(path)

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"task": "binclass", "columns": [{"name": "a", "kind": "ordinal"}]}))
        with pytest.raises(ConfigError, match="columns.0.kind"):
            config_store.load_meta(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            config_store.load_meta(tmp_path / "absent.yaml")

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            config_store.load_meta(path)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("task: [unclosed\n")
        with pytest.raises(ConfigError, match="not valid YAML"):
            config_store.load_meta(path)


class TestRunConfig:
    def test_defaults_without_path(self):
        config = config_store.load_run_config(None)
        assert config.train.timesteps == 1000
        assert config.train.num_layers == 4
        assert config.smote.k_neighbours == 5
        assert config.eval.learners is None

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("")
        assert config_store.load_run_config(path) == RunConfig()

    def test_partial_sections(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump({
            "train": {"iterations": 20, "layer_width": 32},
            "eval": {"learners": ["logistic-regression"], "seeds": 3},
        }))
        config = config_store.load_run_config(path)
        assert config.train.iterations == 20
        assert config.train.batch_size == 256
        assert config.eval.learners == [LearnerKind.LOGISTIC]

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump({"train": {"epochs": 5}}))
        with pytest.raises(ConfigError, match="train.epochs"):
            config_store.load_run_config(path)

    @pytest.mark.parametrize("layers", [3, 10])
    def test_layer_count_outside_search_space(self, tmp_path, layers):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump({"train": {"num_layers": layers}}))
        with pytest.raises(ConfigError, match="num_layers"):
            config_store.load_run_config(path)

    def test_lambda_range_order(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump({"smote": {"lambda_range": [0.8, 0.2]}}))
        with pytest.raises(ConfigError, match="lambda_range"):
            config_store.load_run_config(path)

    def test_yaml_round_trip(self, tmp_path):
        path = tmp_path / "run.yaml"
        original = RunConfig.model_validate({"train": {"seed": 9}, "smote": {"lambda_range": [0.2, 0.6]}})
        config_store.save_yaml(path, original)
        assert config_store.load_run_config(path) == original


class TestSaveJson:
    def test_model(self, tmp_path):
        report = CompareReport(rows=[CompareRow(method="smote", efficiency={"small-mlp": 0.7}, dcr=0.1)])
        path = tmp_path / "out" / "compare.json"
        config_store.save_json(path, report)
        data = json.loads(path.read_text())
        assert data["rows"][0]["method"] == "smote"
        assert path.read_text().endswith("\n")
        assert not path.with_suffix(".json.tmp").exists()

    def test_plain_data_with_enums(self, tmp_path):
        path = tmp_path / "plain.json"
        config_store.save_json(path, {"task": TaskKind.REGRESSION, "where": tmp_path})
        assert json.loads(path.read_text()) == {"task": "regression", "where": str(tmp_path)}


class TestSettings:
    def test_env_threads(self, monkeypatch):
        monkeypatch.setenv("TABSYNTH_THREADS", "3")
        assert Settings().resolve_threads() == 3

    def test_flag_overrides_env(self, monkeypatch):
        monkeypatch.setenv("TABSYNTH_THREADS", "3")
        assert Settings().resolve_threads(override=2) == 2

    def test_falls_back_to_cpus(self, monkeypatch):
        monkeypatch.delenv("TABSYNTH_THREADS", raising=False)
        assert Settings().resolve_threads() >= 1
