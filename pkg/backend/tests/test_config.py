import json
import logging

import pytest

from app.config import (
    DEFAULT_GOLDEN,
    DEFAULT_RUN_CONFIG,
    ConfigError,
    RunConfig,
    config_digest,
    get_settings,
    load_run_config,
    resolve_engine,
)
from app.services.fls import FlsEngineConfig


def test_default_run_config_resolves_engine(run_config):
    assert isinstance(run_config.engine, FlsEngineConfig)
    assert run_config.engine_config.name == "algas2-landing-default"
    assert run_config.seed == 0
    assert run_config.hub.ticks_per_step == 4


def test_setup_carries_every_section(run_config):
    setup = run_config.setup()
    assert setup.engine is run_config.engine_config
    assert setup.dynamics.initial_altitude_m == 10.0
    assert setup.faults == ()


def test_engine_path_falls_back_to_packaged_data(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 4, "dynamics": {"initial_altitude_m": 2.0}}))
    config = load_run_config(path)
    assert config.seed == 4
    assert config.engine_config.name == "algas2-landing-default"


def test_inline_engine(tmp_path, engine_config):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"engine": engine_config.model_dump(mode="json")}))
    assert load_run_config(path).engine_config == engine_config


def test_engine_path_relative_to_config(tmp_path, engine_config):
    renamed = engine_config.model_copy(update={"name": "local-copy"})
    (tmp_path / "engine.json").write_text(renamed.model_dump_json())
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"engine": "engine.json"}))
    assert load_run_config(path).engine_config.name == "local-copy"


@pytest.mark.parametrize(
    "content",
    [
        "not json",
        json.dumps({"unknown_section": {}}),
        json.dumps({"core": {"half_span_x_m": 0}}),
        json.dumps({"faults": [{"target": "core:9", "start_step": 0}]}),
        json.dumps({"engine": "missing_engine.json"}),
    ],
)
def test_invalid_run_configs(tmp_path, content):
    path = tmp_path / "run.json"
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_missing_run_config(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.json")


def test_unresolved_engine_is_an_error():
    with pytest.raises(ConfigError):
        RunConfig().engine_config


def test_digest_is_stable_and_sensitive(run_config):
    assert config_digest(run_config) == config_digest(load_run_config(DEFAULT_RUN_CONFIG))
    assert config_digest(run_config) != config_digest(run_config.model_copy(update={"seed": 1}))


def test_resolve_engine_keeps_inline(run_config, tmp_path):
    assert resolve_engine(run_config, tmp_path) is run_config


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("ALGAS2_OUTPUT_DIR", str(tmp_path))
    monkeypatch.setenv("ALGAS2_LOG_LEVEL", "debug")
    monkeypatch.setenv("ALGAS2_RUN_RETENTION_MINUTES", "15")
    monkeypatch.setenv("ALGAS2_CLEANUP_INTERVAL_MINUTES", "soon")
    settings = get_settings()
    assert settings.output_dir == tmp_path
    assert settings.log_level == "DEBUG"
    assert settings.run_retention_minutes == 15
    assert settings.cleanup_interval_minutes == 10


def test_settings_defaults(monkeypatch):
    for name in ("ALGAS2_CONFIG", "ALGAS2_OUTPUT_DIR", "ALGAS2_LOG_LEVEL", "ALGAS2_DATA_DIR", "ALGAS2_GOLDEN"):
        monkeypatch.delenv(name, raising=False)
    settings = get_settings()
    assert settings.config_path == DEFAULT_RUN_CONFIG
    assert settings.output_dir is None
    assert settings.golden_path == DEFAULT_GOLDEN


def test_settings_banner_logged_at_info(monkeypatch, tmp_path, caplog):
    monkeypatch.setenv("ALGAS2_GOLDEN", str(tmp_path / "golden.csv"))
    with caplog.at_level(logging.INFO, logger="app.config"):
        settings = get_settings()
    assert settings.golden_path == tmp_path / "golden.csv"
    messages = [r.getMessage() for r in caplog.records if r.levelno == logging.INFO]
    assert "=== ALGAS2 Settings ===" in messages
    assert f"Golden samples: {tmp_path / 'golden.csv'}" in messages
