import pytest

from oodkit.config import config_echo, load_config, parse_config_text
from oodkit.errors import ConfigError


def test_parse_minimal_defaults():
    cfg = parse_config_text("")
    assert cfg.source == "synth"
    assert cfg.loss.mode == "none"
    assert cfg.loss.temperature == 0.3
    assert cfg.loss.weight == 2.0
    assert cfg.scorers == ["msp", "energy", "maha", "cosine"]
    assert cfg.seeds == [1, 2, 3, 4, 5]
    assert cfg.hidden_dims == [64]
    assert cfg.rep_dim == 32
    assert cfg.lr == 1e-3


def test_parse_full_config():
    cfg = parse_config_text(
        """
        # benchmark settings
        source = synth
        synth.num_classes = 4
        synth.dim = 8
        synth.per_class = 100
        synth.std = 1.0
        synth.separation = 6.0
        synth.displacement = 12.0
        synth.seed = 11

        loss.mode = margin
        loss.weight = 2.0
        loss.metric = l2
        encoder.hidden_dims = 24
        encoder.rep_dim = 8
        optim.lr = 3e-3
        optim.epochs = 15
        optim.batch_size = 16
        scorers = msp, maha
        seeds = 1,2,3,4,5
        """
    )
    assert cfg.synth.num_classes == 4
    assert cfg.loss.mode == "margin"
    assert cfg.hidden_dims == [24]
    assert cfg.scorers == ["msp", "maha"]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config_text("optim.momentum = 0.9")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("optim.lr = 0.1\noptim.lr = 0.2")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("source = synth\noptim.epochs = ten")


def test_missing_equals_rejected():
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("just some words")


def test_validation_failures():
    with pytest.raises(ConfigError):
        parse_config_text("scorers = frobnitz")
    with pytest.raises(ConfigError):
        parse_config_text("source = embed")  # missing embed.id_path
    with pytest.raises(ConfigError):
        parse_config_text("optim.batch_size = 1")
    with pytest.raises(ConfigError):
        parse_config_text("loss.mode = superduper")


def test_echo_round_trips():
    cfg = parse_config_text("loss.mode = scl\nloss.temperature = 0.5\nscorers = maha\nseeds = 7")
    echo = config_echo(cfg)
    rebuilt = parse_config_text("\n".join(f"{k} = {v}" for k, v in echo.items()))
    assert rebuilt == cfg


def test_load_config_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "nope.cfg")
