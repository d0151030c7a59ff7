import json
import logging

import pytest

from src.core.config_manager import CONFIG_FILE, ConfigManager, RunConfig, TrainConfig
from src.core.errors import ConfigError, DataError, ImageFormatError, MattingError, ShapeMismatchError
from src.core.log import LOG_LEVEL_ENV, ColorFormatter, resolve_level, setup_logging


def test_run_config_round_trips_through_json(tmp_path, tiny_run_config):
    manager = ConfigManager(tmp_path / "run")
    manager.save_run_config(tiny_run_config)
    assert (tmp_path / "run" / CONFIG_FILE).is_file()
    assert manager.load_run_config() == tiny_run_config
    data = json.loads((tmp_path / "run" / CONFIG_FILE).read_text(encoding="utf-8"))
    assert set(data) == {"model", "sgd", "weights", "synth", "train"}


def test_missing_config_falls_back_to_defaults(tmp_path):
    manager = ConfigManager(tmp_path)
    assert manager.load_config() == RunConfig().to_dict()
    defaults = RunConfig()
    assert defaults.sgd.decay_every == 10
    assert defaults.train.holdout == 0.125
    assert (defaults.weights.lambda_s, defaults.weights.lambda_d, defaults.weights.lambda_alpha) == (1.0, 10.0, 1.0)


def test_broken_json_is_a_config_error(tmp_path):
    (tmp_path / CONFIG_FILE).write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        ConfigManager(tmp_path).load_config()


def test_partial_sections_keep_defaults():
    config = RunConfig.from_dict({"train": {"epochs": 2}, "sgd": {"lr": 0.5}})
    assert config.train.epochs == 2 and config.train.batch == 4
    assert config.sgd.lr == 0.5 and config.sgd.momentum == 0.9
    merged = config.merged({"model": {"use_fpm": False}})
    assert merged.model.use_fpm is False and merged.train.epochs == 2
    assert config.model.use_fpm is True


def test_unknown_sections_and_keys_are_rejected():
    with pytest.raises(ConfigError, match="sections"):
        RunConfig.from_dict({"optimizer": {}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"train": {"epoch": 3}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"train": 3})
    with pytest.raises(ConfigError):
        RunConfig.from_dict([("train", {})])


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(batch=0)
    with pytest.raises(ConfigError):
        TrainConfig(holdout=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(dtype="float16")
    with pytest.raises(ConfigError):
        TrainConfig(crop_size=48)
    with pytest.raises(ConfigError):
        TrainConfig(iterations=0)


def test_yaml_and_json_overrides(tmp_path):
    (tmp_path / "run.yaml").write_text("train:\n  epochs: 3\nweights:\n  lambda_d: 5\n", encoding="utf-8")
    overrides = ConfigManager.load_overrides(tmp_path / "run.yaml")
    assert RunConfig().merged(overrides).weights.lambda_d == 5.0

    (tmp_path / "run.json").write_text(json.dumps({"sgd": {"lr": 0.1}}), encoding="utf-8")
    assert ConfigManager.load_overrides(tmp_path / "run.json") == {"sgd": {"lr": 0.1}}

    (tmp_path / "empty.yaml").write_text("", encoding="utf-8")
    assert ConfigManager.load_overrides(tmp_path / "empty.yaml") == {}

    for name, text in (("list.yaml", "- 1\n- 2\n"), ("bad.yaml", "train: [1, 2\n"), ("extra.yaml", "misc: {}\n")):
        (tmp_path / name).write_text(text, encoding="utf-8")
        with pytest.raises(ConfigError):
            ConfigManager.load_overrides(tmp_path / name)


def test_checkpoint_dir_is_created(tmp_path):
    path = ConfigManager(tmp_path / "run").get_checkpoint_dir()
    assert path.is_dir() and path.name == "checkpoints"


def test_error_messages_carry_details():
    error = ShapeMismatchError("conv2d", "channels differ", x=(1, 2, 3, 3), w=[4, 3, 3, 3])
    assert str(error) == "conv2d: channels differ (op=conv2d, x=(1, 2, 3, 3), w=(4, 3, 3, 3))"
    assert error.details["w"] == (4, 3, 3, 3)
    assert str(ConfigError("plain")) == "plain"
    assert isinstance(ImageFormatError("x"), DataError)
    assert isinstance(DataError("x"), MattingError)


def test_log_level_resolution(monkeypatch):
    monkeypatch.setenv(LOG_LEVEL_ENV, "debug")
    assert resolve_level() == logging.DEBUG
    assert resolve_level("warning") == logging.WARNING
    assert resolve_level(logging.ERROR) == logging.ERROR
    assert resolve_level("chatty") == logging.INFO


def test_setup_logging_installs_a_single_handler():
    setup_logging("info")
    root = setup_logging("debug")
    assert root.name == "src"
    assert len(root.handlers) == 1
    assert root.level == logging.DEBUG
    record = logging.LogRecord("src.x", logging.WARNING, __file__, 1, "hello", None, None)
    assert ColorFormatter(use_color=False).format(record) == "WARNING src.x: hello"
    assert "hello" in ColorFormatter(use_color=True).format(record)
    assert record.levelname == "WARNING"


def test_core_package_exports_config_errors_and_logging():
    import src.core as core

    assert core.ConfigManager is ConfigManager and core.RunConfig is RunConfig
    assert core.TrainConfig is TrainConfig and core.CONFIG_FILE == CONFIG_FILE
    assert core.ConfigError is ConfigError and issubclass(core.CheckpointError, core.MattingError)
    assert core.setup_logging is setup_logging and core.LOG_LEVEL_ENV == LOG_LEVEL_ENV
    for name in core.__all__:
        assert getattr(core, name) is not None
    with pytest.raises(AttributeError):
        getattr(core, "NotThere")
