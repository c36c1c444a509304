import json

import pytest

from concord import ConfigError, MissingPathError, RunConfig
from concord._config import SECTION_DEFAULTS


def _touch(path, text="quantity_id,instrument_id,forecast\n"):
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_resolve():
    config = RunConfig("simulate")
    assert config.seed == 0
    assert config["kinds"] == ["NE", "CE", "GE", "BE"]
    assert config.synthetic_config().seed == 0
    assert RunConfig("generate").ground_truth().num_groups == 2


def test_unknown_subcommand():
    with pytest.raises(ConfigError):
        RunConfig("plot")


@pytest.mark.parametrize("document", [
    {"simulate": {"deltaa": 0.5}},
    {"seeds": 3},
    {"fit": {"hyper": {"learning_rat": 0.1}}},
    {"generate": {"groups": [{"alpha": 1.0, "slope": 2.0}]}},
    {"eval": {"pipeline": {"train": "x", "extra": 1}}},
])
def test_unknown_keys_are_rejected(document):
    with pytest.raises(ConfigError, match="Unknown key"):
        RunConfig("simulate", document)


def test_other_sections_are_checked_but_ignored():
    config = RunConfig("simulate", {"infer": {"num_samples": 5}})
    assert "num_samples" not in config.section


def test_command_line_overrides():
    config = RunConfig("simulate", {"seed": 1, "simulate": {"delta": 0.2, "alpha": 0.9}},
                       overrides={"delta": 0.3, "alpha": None, "seed": 5, "verbosity": 2})
    assert config["delta"] == 0.3
    assert config["alpha"] == 0.9
    assert config.seed == 5
    assert config.verbosity == 2


@pytest.mark.parametrize("document", [
    {"simulate": {"delta": 2.0}},
    {"simulate": {"kinds": ["NE", "XE"]}},
    {"simulate": {"n_jobs": 0}},
    {"seed": -4},
    {"seed": "abc"},
    {"verbosity": -1},
])
def test_invalid_values_fail_fast(document):
    with pytest.raises(ConfigError, match="Invalid simulate configuration"):
        RunConfig("simulate", document)


def test_output_dir_must_be_a_path():
    with pytest.raises(ConfigError):
        RunConfig("simulate", {"output_dir": 3})


def test_generate_groups_fill_in_defaults():
    config = RunConfig("generate", {"generate": {"groups": [{"sigma": 0.3}, {"alpha": 0.6, "beta": 0.1}]}})
    assert config["groups"][1] == {"alpha": 0.6, "beta": 0.1, "sigma": 1.0, "weight": 1.0}
    with pytest.raises(ConfigError):
        RunConfig("generate", {"generate": {"groups": [{"alpha": 0.5}]}})
    with pytest.raises(ConfigError):
        RunConfig("generate", {"generate": {"groups": []}})


def test_required_paths():
    with pytest.raises(ConfigError, match="fit.train is required"):
        RunConfig("fit")
    with pytest.raises(ConfigError, match="infer.params"):
        RunConfig("infer")


def test_paths_resolve_against_the_document(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    _touch(data / "train.csv")
    config_path = data / "run.json"
    config_path.write_text(json.dumps({"seed": 9, "output_dir": "out", "fit": {"train": "train.csv"}}),
                           encoding="utf-8")
    config = RunConfig.from_file(config_path, "fit")
    assert config.path("train") == data / "train.csv"
    assert config.output_dir == data / "out"
    assert config.hyper_params().seed == 9


def test_missing_paths_fail_fast(tmp_path):
    with pytest.raises(MissingPathError):
        RunConfig("fit", {"fit": {"train": "missing.csv"}}, base_dir=tmp_path)


def test_bad_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{\"seed\": 1,", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        RunConfig.from_file(path, "simulate")


def test_echo_spells_out_everything(tmp_path):
    _touch(tmp_path / "train.csv")
    config = RunConfig("fit", {"fit": {"train": "train.csv", "num_groups": 3}}, base_dir=tmp_path,
                       overrides={"output_dir": str(tmp_path / "run")})
    path = config.write_echo()
    assert path == tmp_path / "run" / "fit.config.json"
    echo = json.loads(path.read_text(encoding="utf-8"))
    assert echo["seed"] == 0
    assert echo["fit"]["train"] == str(tmp_path / "train.csv")
    assert echo["fit"]["num_groups"] == 3
    assert set(echo["fit"]["hyper"]) == set(SECTION_DEFAULTS["fit"]["hyper"])


def test_infer_budget(tmp_path):
    _touch(tmp_path / "params.json", "{}")
    _touch(tmp_path / "test.csv")
    config = RunConfig("infer", {"seed": 4, "infer": {"params": "params.json", "test": "test.csv", "burn_in": 10}},
                       base_dir=tmp_path)
    budget = config.chain_budget()
    assert (budget.num_samples, budget.burn_in, budget.seed) == (1000, 10, 4)
    with pytest.raises(ConfigError):
        RunConfig("infer", {"infer": {"params": "params.json", "test": "test.csv", "z_update": "posterior"}},
                  base_dir=tmp_path)


def test_eval_needs_one_source(tmp_path):
    _touch(tmp_path / "p.csv")
    with pytest.raises(ConfigError, match="exactly one"):
        RunConfig("eval", base_dir=tmp_path)
    with pytest.raises(ConfigError, match="actuals is required"):
        RunConfig("eval", {"eval": {"predictions": {"NE": "p.csv"}}}, base_dir=tmp_path)
    config = RunConfig("eval", {"eval": {"predictions": {"NE": "p.csv"}, "actuals": "p.csv"}}, base_dir=tmp_path)
    assert config.to_dict()["eval"]["predictions"] == {"NE": str(tmp_path / "p.csv")}


@pytest.mark.parametrize("changes", [{"n_bootstrap": 50}, {"ci_level": 1.5}])
def test_eval_bootstrap_settings(tmp_path, changes):
    _touch(tmp_path / "p.csv")
    section = dict({"predictions": {"NE": "p.csv"}, "actuals": "p.csv"}, **changes)
    with pytest.raises(ConfigError):
        RunConfig("eval", {"eval": section}, base_dir=tmp_path)


def test_eval_pipeline(tmp_path):
    for split in ("train", "valid", "test"):
        _touch(tmp_path / f"{split}.csv")
    pipeline = {"train": "train.csv", "valid": "valid.csv", "test": "test.csv", "models": ["NE", "LVBC"]}
    config = RunConfig("eval", {"eval": {"pipeline": pipeline}}, base_dir=tmp_path)
    assert config["pipeline"]["num_groups"] == 2
    assert config.to_dict()["eval"]["pipeline"]["test"] == str(tmp_path / "test.csv")
    with pytest.raises(ConfigError, match="subset"):
        RunConfig("eval", {"eval": {"pipeline": dict(pipeline, models=["NE", "RF"])}}, base_dir=tmp_path)
