"""
Tests for flat run-config files and the RunConfig models.

Tests cover:
- Parsing: comments, quoting, none/null, dotted nesting
- Overrides replacing file values
- Validation errors collected into one ConfigError
- Cross-field checks and likelihood-dependent RRT defaults
- A dumped config reads back to the same model
"""

import pytest

from app.models.run_config import RRTConfig, RunConfig
from app.services.experiment.config_files import (
    ConfigError,
    apply_overrides,
    build_run_config,
    dump_flat,
    load_run_config,
    parse_flat,
)


class TestParseFlat:

    def test_nesting_comments_and_nulls(self):
        tree = parse_flat([
            "# experiment",
            "dataset.path = data/x.csv   # trailing comment",
            "R = 3",
            "likelihood.kind = uniform",
            "rrt.max_temp_nodes = none",
            "dataset.name = 'quoted name'",
            "",
        ])
        assert tree == {
            "dataset": {"path": "data/x.csv", "name": "quoted name"},
            "R": "3",
            "likelihood": {"kind": "uniform"},
            "rrt": {"max_temp_nodes": None},
        }

    def test_quoted_null_stays_a_string(self):
        assert parse_flat(['dataset.name = "null"']) == {"dataset": {"name": "null"}}

    def test_missing_equals_reports_line(self):
        with pytest.raises(ConfigError, match="cfg:2"):
            parse_flat(["R = 2", "just words"], source="cfg")

    def test_malformed_key(self):
        with pytest.raises(ConfigError):
            parse_flat(["rrt..s0 = 1"])

    def test_key_under_scalar(self):
        with pytest.raises(ConfigError):
            parse_flat(["R = 2", "R.x = 3"])


class TestOverrides:

    def test_override_replaces_file_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("dataset.path = x.csv\nR = 2\nmethod = nvi\n", encoding="utf-8")
        config = load_run_config(path, ["R=4", "nvi.M = 6"])
        assert config.R == 4
        assert config.nvi.M == 6
        assert config.method == "nvi"

    def test_overrides_alone(self):
        config = load_run_config(None, ["dataset.synthetic.D = 12", "R = 3"])
        assert config.dataset.synthetic.D == 12
        assert config.dataset.label == "two_nmf_toy"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "absent.cfg")

    def test_override_syntax(self):
        with pytest.raises(ConfigError, match="--override #1"):
            apply_overrides({}, ["R"])


class TestValidation:

    def test_all_errors_listed(self):
        tree = parse_flat(["dataset.path = x.csv", "R = 0", "rrt.growth = 0.5", "nvi.bogus = 1"])
        with pytest.raises(ConfigError) as excinfo:
            build_run_config(tree)
        fields = " ".join(excinfo.value.errors)
        assert len(excinfo.value.errors) == 3
        assert "R" in fields and "rrt.growth" in fields and "nvi.bogus" in fields

    def test_dataset_needs_one_source(self):
        with pytest.raises(ConfigError):
            build_run_config({"R": "2", "dataset": {"path": "x.csv", "synthetic": {"D": "10"}}})
        with pytest.raises(ConfigError):
            build_run_config({"R": "2", "dataset": {}})

    def test_gibbs_needs_gaussian(self):
        with pytest.raises(ConfigError, match="gibbs_onvi"):
            load_run_config(None, ["dataset.path = x.csv", "R = 2", "method = gibbs_onvi",
                                   "likelihood.kind = uniform"])

    def test_ground_truth_needs_synthetic(self):
        with pytest.raises(ConfigError, match="ground_truth"):
            load_run_config(None, ["dataset.path = x.csv", "R = 2", "init_source = ground_truth"])

    def test_numeric_or_empirical_noise(self):
        config = load_run_config(None, ["dataset.path = x.csv", "R = 2", "likelihood.sigma2 = 0.25"])
        assert config.likelihood.sigma2 == 0.25
        config = load_run_config(None, ["dataset.path = x.csv", "R = 2", "likelihood.sigma2 = empirical_x10"])
        assert config.likelihood.sigma2 == "empirical_x10"


class TestRRTDefaults:

    @pytest.mark.parametrize("kind, cap, restarts", [("gaussian", 100, 50), ("uniform", 90, 10)])
    def test_resolved_by_likelihood(self, kind, cap, restarts):
        resolved = RRTConfig().resolved(kind)
        assert resolved.max_temp_nodes == cap
        assert resolved.n_init_restarts == restarts

    def test_explicit_values_win(self):
        resolved = RRTConfig(max_temp_nodes=7, n_init_restarts=2).resolved("uniform")
        assert (resolved.max_temp_nodes, resolved.n_init_restarts) == (7, 2)


class TestDumpFlat:

    def test_dump_reads_back(self):
        config = load_run_config(None, [
            "dataset.synthetic.D = 20", "dataset.synthetic.N = 30", "R = 3",
            "likelihood.kind = uniform", "likelihood.eps = 0.02", "rrt.s0 = 0.005",
            "sampler.onvi = false",
        ])
        again = build_run_config(parse_flat(dump_flat(config).splitlines()))
        assert again == config
        assert isinstance(again, RunConfig)

    def test_dump_lists_every_field(self):
        config = load_run_config(None, ["dataset.path = x.csv", "R = 2"])
        text = dump_flat(config)
        assert "rrt.max_temp_nodes = none" in text
        assert "sampler.onvi = true" in text
        assert "metrics.epsilon_max = 90.0" in text
