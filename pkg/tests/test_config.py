import pytest

from fairlens.config import RunConfig, format_config, load_config, parse_config_text
from fairlens.errors import ConfigError


def test_defaults_validate():
    cfg = load_config()
    assert cfg == RunConfig()
    assert cfg.gen_config().n_profiles == 24000
    assert cfg.removal_config().seed == cfg.train_config().seed == 42
    assert cfg.bias_specs()[1].boosted_group == 0


def test_parse_text_and_comments():
    got = parse_config_text("# comment\nseed = 7  # trailing\n\nn-profiles=48\nalpha = 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1\n")
    assert got == {"seed": 7, "n_profiles": 48, "alpha": (0.1,) * 7}


@pytest.mark.parametrize("text", ["bogus = 1", "seed = abc", "seed", "epochs = 1.5"])
def test_bad_config_lines(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 3\nk = 10\nn_profiles = 240\n")
    cfg = load_config(path, {"seed": 9, "k": None})
    assert (cfg.seed, cfg.k, cfg.n_profiles) == (9, 10, 240)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError):
        load_config(None, {"nope": 1})


@pytest.mark.parametrize("changes", [
    {"n_profiles": 23},
    {"k": 5000},
    {"k": 0},
    {"gender_penalty": 0.7},
    {"penalized_ethnicity": 3},
    {"boosted_ethnicity": 2},
    {"removal_target": 0.3},
    {"probe_epochs": 0},
])
def test_invalid_values(changes):
    with pytest.raises(ConfigError):
        RunConfig().replace(**changes).validate()


def test_format_round_trip():
    cfg = RunConfig().replace(seed=5, alpha=(0.1,) * 7, out="x y")
    assert load_config(None, parse_config_text(format_config(cfg))) == cfg
